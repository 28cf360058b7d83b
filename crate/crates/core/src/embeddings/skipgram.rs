use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{init_uniform_xavier, softmax_into, Matrix, Parameters, RngState, Scalar};
use crate::training::AdamState;

use super::Vocabulary;

/// Relative-frequency threshold of the subsampling rule.
pub const SUBSAMPLE_THRESHOLD: f64 = 1e-6;

/// Probability of keeping a context word of relative frequency `z`:
/// `min(1, (sqrt(z / t) + 1) · t / z)` with `t = 1e-6`.
pub fn keep_probability(z: f64) -> Result<f64> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(Error::invalid(format!(
            "relative frequency {z} outside (0, 1]"
        )));
    }
    let t = SUBSAMPLE_THRESHOLD;
    Ok((((z / t).sqrt() + 1.0) * (t / z)).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkipGramPair {
    pub center: usize,
    pub context: usize,
}

/// Skip-gram pairs with per-occurrence context subsampling.
///
/// For every position, each context token within `window` is kept iff a fresh
/// uniform draw is strictly below `keep(context)`. Centers are never dropped.
pub fn generate_pairs_with<F>(
    documents: &[Vec<usize>],
    window: usize,
    keep: F,
    rng: &mut RngState,
) -> Result<Vec<SkipGramPair>>
where
    F: Fn(usize) -> f64,
{
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let mut pairs = Vec::new();
    for doc in documents {
        for (i, &center) in doc.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(doc.len().saturating_sub(1));
            for (j, &context) in doc.iter().enumerate().take(hi + 1).skip(lo) {
                if j == i {
                    continue;
                }
                if rng.uniform() < keep(context) {
                    pairs.push(SkipGramPair { center, context });
                }
            }
        }
    }
    Ok(pairs)
}

/// [`generate_pairs_with`] using [`keep_probability`] of each context word's
/// relative frequency.
pub fn generate_pairs(
    documents: &[Vec<usize>],
    window: usize,
    vocab: &Vocabulary,
    rng: &mut RngState,
) -> Result<Vec<SkipGramPair>> {
    let keep: Vec<f64> = (0..vocab.len())
        .map(|i| keep_probability(vocab.relative_frequency(i)))
        .collect::<Result<_>>()?;
    generate_pairs_with(documents, window, |i| keep[i], rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub epochs: usize,
    pub window: usize,
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            window: 2,
            dim: 300,
            learning_rate: 0.05,
            batch_size: 512,
        }
    }
}

/// Skip-gram network: `V×d` input embedding and `d×V` output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Word2VecModel<T> {
    pub input: Matrix<T>,
    pub output: Matrix<T>,
}

impl<T: Scalar> Parameters<T> for Word2VecModel<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        vec![
            ("input".into(), &self.input),
            ("output".into(), &self.output),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        vec![
            ("input".into(), &mut self.input),
            ("output".into(), &mut self.output),
        ]
    }

    fn zeros_like(&self) -> Self {
        Self {
            input: Matrix::zeros(self.input.rows(), self.input.cols()),
            output: Matrix::zeros(self.output.rows(), self.output.cols()),
        }
    }
}

impl<T: Scalar> Word2VecModel<T> {
    pub fn new(vocab_size: usize, dim: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            input: init_uniform_xavier(vocab_size, dim, rng)?,
            output: init_uniform_xavier(dim, vocab_size, rng)?,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.input.rows()
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    fn logits(&self, center: usize) -> Vec<f64> {
        let v = self.vocab_size();
        let mut logits = vec![0.0f64; v];
        for (k, &hk) in self.input.row(center).iter().enumerate() {
            let hk = hk.as_f64();
            for (l, &w) in logits.iter_mut().zip(self.output.row(k)) {
                *l += hk * w.as_f64();
            }
        }
        logits
    }

    /// Full-softmax cross-entropy `−log p(context | center)`.
    pub fn pair_loss(&self, pair: SkipGramPair) -> f64 {
        let logits = self.logits(pair.center);
        let mut probs = vec![0.0; logits.len()];
        softmax_into(&logits, &mut probs);
        -probs[pair.context].max(f64::MIN_POSITIVE).ln()
    }

    /// Mean per-pair loss.
    pub fn mean_loss(&self, pairs: &[SkipGramPair]) -> f64 {
        pairs.iter().map(|&p| self.pair_loss(p)).sum::<f64>() / pairs.len().max(1) as f64
    }

    /// Summed loss over `pairs` and its gradient accumulated into `grad_in`
    /// (rows indexed by center) and `grad_out` (`d×V`), both in `f64`.
    fn accumulate(&self, pairs: &[SkipGramPair], grad_in: &mut [f64], grad_out: &mut [f64]) -> f64 {
        let v = self.vocab_size();
        let d = self.dim();
        let mut probs = vec![0.0; v];
        let mut loss = 0.0;
        for &pair in pairs {
            let logits = self.logits(pair.center);
            softmax_into(&logits, &mut probs);
            loss -= probs[pair.context].max(f64::MIN_POSITIVE).ln();
            probs[pair.context] -= 1.0;
            let h = self.input.row(pair.center);
            for k in 0..d {
                let hk = h[k].as_f64();
                let out_row = self.output.row(k);
                let g_row = &mut grad_out[k * v..(k + 1) * v];
                let mut dh = 0.0;
                for j in 0..v {
                    g_row[j] += hk * probs[j];
                    dh += out_row[j].as_f64() * probs[j];
                }
                grad_in[pair.center * d + k] += dh;
            }
        }
        loss
    }
}

/// Fixed number of gradient shards per batch; reduction runs in shard order.
const SHARDS: usize = 8;

/// Trains skip-gram with full-softmax cross-entropy and Adam.
///
/// Returns the model and the mean per-pair training loss of every epoch.
pub fn train_word2vec<T: Scalar>(
    pairs: &[SkipGramPair],
    vocab_size: usize,
    config: &SkipGramConfig,
    rng: &mut RngState,
) -> Result<(Word2VecModel<T>, Vec<f64>)> {
    if vocab_size < 2 {
        return Err(Error::invalid(
            "word2vec needs a vocabulary of at least 2 words",
        ));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("word2vec needs at least one training pair"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if let Some(bad) = pairs
        .iter()
        .find(|p| p.center >= vocab_size || p.context >= vocab_size)
    {
        return Err(Error::invalid(format!(
            "pair {bad:?} out of vocabulary range"
        )));
    }

    let mut model = Word2VecModel::<T>::new(vocab_size, config.dim, rng)?;
    let mut adam = AdamState::new(config.learning_rate);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let d = config.dim;

    for epoch in 0..config.epochs {
        rng.derive(&[0x5347, epoch as u64]).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, batch_idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<SkipGramPair> = batch_idx.iter().map(|&i| pairs[i]).collect();
            let shard_len = batch.len().div_ceil(SHARDS);
            let shards: Vec<(f64, Vec<f64>, Vec<f64>)> = batch
                .par_chunks(shard_len)
                .map(|shard| {
                    let mut gi = vec![0.0; vocab_size * d];
                    let mut go = vec![0.0; d * vocab_size];
                    let loss = model.accumulate(shard, &mut gi, &mut go);
                    (loss, gi, go)
                })
                .collect();

            let mut loss = 0.0;
            let mut gi = vec![0.0; vocab_size * d];
            let mut go = vec![0.0; d * vocab_size];
            for (l, si, so) in &shards {
                loss += l;
                gi.iter_mut().zip(si).for_each(|(a, b)| *a += b);
                go.iter_mut().zip(so).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "word2vec loss at epoch {epoch}, batch {b}"
                )));
            }
            epoch_loss += loss;
            let n = batch.len() as f64;
            let grads = Word2VecModel {
                input: Matrix::from_vec(
                    vocab_size,
                    d,
                    gi.iter().map(|x| T::cast(x / n)).collect(),
                )?,
                output: Matrix::from_vec(
                    d,
                    vocab_size,
                    go.iter().map(|x| T::cast(x / n)).collect(),
                )?,
            };
            adam.step(&mut model, &grads)?;
        }
        if !model.all_finite() {
            return Err(Error::NonFinite(format!(
                "word2vec parameters after epoch {epoch}"
            )));
        }
        trace.push(epoch_loss / pairs.len() as f64);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_probability_examples() {
        assert_eq!(keep_probability(1e-6).unwrap(), 1.0);
        assert!((keep_probability(1e-4).unwrap() - 0.11).abs() < 1e-12);
        assert!((keep_probability(1e-2).unwrap() - 0.0101).abs() < 1e-12);
        assert!(keep_probability(0.0).is_err());
        assert!(keep_probability(-1.0).is_err());
        assert!(keep_probability(1.5).is_err());
    }

    #[test]
    fn keep_probability_is_decreasing() {
        let mut prev = keep_probability(1.01e-6).unwrap();
        let mut z: f64 = 1.01e-6;
        while z < 1.0 {
            z *= 1.3;
            let p = keep_probability(z.min(1.0)).unwrap();
            assert!(p <= prev, "increasing at {z}");
            if prev < 1.0 {
                assert!(p < prev, "not strictly decreasing at {z}");
            }
            prev = p;
        }
    }

    #[test]
    fn pairs_without_subsampling() {
        let doc = vec![vec![0, 1, 2]];
        let pairs = generate_pairs_with(&doc, 2, |_| 1.0, &mut RngState::new(0)).unwrap();
        let got: Vec<(usize, usize)> = pairs.iter().map(|p| (p.center, p.context)).collect();
        assert_eq!(got, [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    fn forced_drop() {
        let doc = vec![vec![0, 1]];
        let pairs = generate_pairs_with(
            &doc,
            1,
            |i| if i == 1 { 0.0 } else { 1.0 },
            &mut RngState::new(0),
        )
        .unwrap();
        assert_eq!(
            pairs,
            [SkipGramPair {
                center: 1,
                context: 0
            }]
        );
    }

    #[test]
    fn pair_count_formula() {
        let docs = vec![vec![0; 7], vec![1; 1], vec![2; 3]];
        for window in 1..5 {
            let pairs = generate_pairs_with(&docs, window, |_| 1.0, &mut RngState::new(0)).unwrap();
            let expected: usize = docs
                .iter()
                .map(|d| {
                    (0..d.len())
                        .map(|i| window.min(i) + window.min(d.len() - 1 - i))
                        .sum::<usize>()
                })
                .sum();
            assert_eq!(pairs.len(), expected);
        }
    }

    #[test]
    fn empty_corpus_and_zero_window() {
        assert!(generate_pairs_with(&[], 2, |_| 1.0, &mut RngState::new(0))
            .unwrap()
            .is_empty());
        assert!(generate_pairs_with(&[vec![0, 1]], 0, |_| 1.0, &mut RngState::new(0)).is_err());
    }

    #[test]
    fn uniform_logits_give_log_vocab_loss() {
        let mut model = Word2VecModel::<f64>::new(4, 8, &mut RngState::new(1)).unwrap();
        model.output = Matrix::zeros(8, 4);
        let loss = model.pair_loss(SkipGramPair {
            center: 2,
            context: 3,
        });
        assert!((loss - 4f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        use crate::numerics::finite_diff_check;
        let mut rng = RngState::new(5);
        let model = Word2VecModel::<f64>::new(5, 3, &mut rng).unwrap();
        let pairs = [
            SkipGramPair {
                center: 0,
                context: 1,
            },
            SkipGramPair {
                center: 3,
                context: 4,
            },
            SkipGramPair {
                center: 0,
                context: 2,
            },
        ];
        let mut gi = vec![0.0; 15];
        let mut go = vec![0.0; 15];
        model.accumulate(&pairs, &mut gi, &mut go);
        let grads = Word2VecModel {
            input: Matrix::from_vec(5, 3, gi).unwrap(),
            output: Matrix::from_vec(3, 5, go).unwrap(),
        };
        let loss = |named: &crate::numerics::NamedTensors<f64>| {
            let mut m = model.clone();
            m.load_named(named)?;
            Ok(pairs.iter().map(|&p| m.pair_loss(p)).sum())
        };
        let reports =
            finite_diff_check(loss, &model.to_named(), &grads.to_named(), 1e-4, 1e-5).unwrap();
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
    }

    #[test]
    fn training_reduces_loss() {
        let mut rng = RngState::new(2);
        let pairs: Vec<SkipGramPair> = (0..200)
            .map(|i| SkipGramPair {
                center: i % 10,
                context: (i * 7 + 3) % 10,
            })
            .collect();
        let config = SkipGramConfig {
            epochs: 50,
            dim: 16,
            batch_size: 64,
            learning_rate: 0.05,
            ..Default::default()
        };
        let (_, trace) = train_word2vec::<f32>(&pairs, 10, &config, &mut rng).unwrap();
        assert_eq!(trace.len(), 50);
        assert!(trace[49] < trace[0]);
    }

    #[test]
    fn training_rejects_degenerate_input() {
        let cfg = SkipGramConfig::default();
        let pair = [SkipGramPair {
            center: 0,
            context: 1,
        }];
        assert!(train_word2vec::<f32>(&pair, 1, &cfg, &mut RngState::new(0)).is_err());
        assert!(train_word2vec::<f32>(&[], 4, &cfg, &mut RngState::new(0)).is_err());
        assert!(train_word2vec::<f32>(
            &pair,
            2,
            &SkipGramConfig {
                batch_size: 0,
                ..cfg
            },
            &mut RngState::new(0)
        )
        .is_err());
    }
}

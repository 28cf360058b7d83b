use crate::error::{Error, Result};
use crate::numerics::{Matrix, Parameters, RngState, Scalar};

use super::attention::{penalization, penalization_grad, AttentionBundle, SelfAttention};
use super::bilstm::{BiLstm, BiLstmCache};
use super::dropout::dropout_mask;
use super::head::{AttentionHead, AttentionHeadCache, LinearHead, LinearHeadCache};
use super::lstm::{LstmStack, StackCache};
use super::Mode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstmClassifierConfig {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
}

impl Default for LstmClassifierConfig {
    fn default() -> Self {
        Self {
            input: 300,
            hidden: 64,
            layers: 8,
            dropout: 0.5,
        }
    }
}

/// Stacked unidirectional LSTM whose final top-layer state feeds a sigmoid
/// head, with dropout between the two.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmClassifier<T> {
    pub lstm: LstmStack<T>,
    pub head: LinearHead<T>,
    pub dropout: f64,
}

#[derive(Clone, Debug)]
pub struct LstmClassifierCache<T> {
    stack: StackCache<T>,
    steps: usize,
    mask: Option<Matrix<T>>,
    head: LinearHeadCache<T>,
}

impl<T: Scalar> LstmClassifier<T> {
    pub fn new(config: &LstmClassifierConfig, rng: &mut RngState) -> Result<Self> {
        check_dropout(config.dropout)?;
        Ok(Self {
            lstm: LstmStack::new(config.input, config.hidden, config.layers, rng)?,
            head: LinearHead::new(config.hidden, rng)?,
            dropout: config.dropout,
        })
    }

    pub fn config(&self) -> LstmClassifierConfig {
        LstmClassifierConfig {
            input: self.lstm.input_size(),
            hidden: self.lstm.hidden_size(),
            layers: self.lstm.depth(),
            dropout: self.dropout,
        }
    }

    pub fn forward(
        &self,
        xs: &Matrix<T>,
        mode: Mode,
        rng: &mut RngState,
    ) -> Result<(f64, LstmClassifierCache<T>)> {
        let (top, stack) = self.lstm.forward(xs, 0.0, mode, rng)?;
        let mut last = top.row(top.rows() - 1).to_vec();
        let mask = if mode == Mode::Train && self.dropout > 0.0 {
            let mask = dropout_mask::<T>(1, last.len(), self.dropout, rng)?;
            for (v, m) in last.iter_mut().zip(mask.data()) {
                *v = *v * *m;
            }
            Some(mask)
        } else {
            None
        };
        let (p, head) = self.head.forward(&last)?;
        Ok((
            p,
            LstmClassifierCache {
                stack,
                steps: xs.rows(),
                mask,
                head,
            },
        ))
    }

    pub fn predict(&self, xs: &Matrix<T>) -> Result<f64> {
        Ok(self.forward(xs, Mode::Eval, &mut RngState::new(0))?.0)
    }

    /// Returns parameter gradients and the gradient on the input sequence.
    pub fn backward(
        &self,
        cache: &LstmClassifierCache<T>,
        d_p: f64,
    ) -> Result<(Self, Matrix<f64>)> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, d_p, &mut grads)?;
        Ok((grads, dx))
    }

    /// Adds this example's parameter gradients into `grads`.
    pub fn backward_into(
        &self,
        cache: &LstmClassifierCache<T>,
        d_p: f64,
        grads: &mut Self,
    ) -> Result<Matrix<f64>> {
        if grads.config() != self.config() {
            return Err(Error::InvalidState(
                "gradient buffer does not match model".into(),
            ));
        }
        let mut d_last = self.head.backward(&cache.head, d_p, &mut grads.head)?;
        if let Some(mask) = &cache.mask {
            for (g, m) in d_last.iter_mut().zip(mask.data()) {
                *g *= m.as_f64();
            }
        }
        let mut d_top = Matrix::<f64>::zeros(cache.steps, self.lstm.hidden_size());
        d_top.row_mut(cache.steps - 1).copy_from_slice(&d_last);
        self.lstm.backward(&cache.stack, &d_top, &mut grads.lstm)
    }
}

impl<T: Scalar> Parameters<T> for LstmClassifier<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = self.lstm.params("lstm");
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = self.lstm.params_mut("lstm");
        out.push(("head.weight".into(), &mut self.head.weight));
        out.push(("head.bias".into(), &mut self.head.bias));
        out
    }

    fn zeros_like(&self) -> Self {
        Self {
            lstm: self.lstm.zeros_like(),
            head: LinearHead::zeros(self.head.input_size()),
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointConfig {
    pub input: usize,
    /// Per-direction hidden size.
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub hops: usize,
    pub attention_hidden: usize,
    pub fc_hidden: usize,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            input: 300,
            hidden: 32,
            layers: 8,
            dropout: 0.5,
            hops: 20,
            attention_hidden: 150,
            fc_hidden: 2000,
        }
    }
}

/// BiLSTM encoder, structured self-attention and a two-layer sigmoid head.
#[derive(Clone, Debug, PartialEq)]
pub struct JointModel<T> {
    pub encoder: BiLstm<T>,
    pub attention: SelfAttention<T>,
    pub head: AttentionHead<T>,
    pub dropout: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointOutput {
    pub probability: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug)]
pub struct JointCache<T> {
    encoder: BiLstmCache<T>,
    bundle: AttentionBundle<T>,
    head: AttentionHeadCache<T>,
}

impl<T: Scalar> JointCache<T> {
    pub fn bundle(&self) -> &AttentionBundle<T> {
        &self.bundle
    }
}

impl<T: Scalar> JointModel<T> {
    pub fn new(config: &JointConfig, rng: &mut RngState) -> Result<Self> {
        check_dropout(config.dropout)?;
        let width = 2 * config.hidden;
        Ok(Self {
            encoder: BiLstm::new(config.input, config.hidden, config.layers, rng)?,
            attention: SelfAttention::new(width, config.attention_hidden, config.hops, rng)?,
            head: AttentionHead::new(config.hops * width, config.fc_hidden, rng)?,
            dropout: config.dropout,
        })
    }

    pub fn config(&self) -> JointConfig {
        JointConfig {
            input: self.encoder.input_size(),
            hidden: self.encoder.hidden_size(),
            layers: self.encoder.forward.depth(),
            dropout: self.dropout,
            hops: self.attention.hops(),
            attention_hidden: self.attention.hidden(),
            fc_hidden: self.head.fc_bias.rows(),
        }
    }

    pub fn forward(
        &self,
        xs: &Matrix<T>,
        mode: Mode,
        rng: &mut RngState,
    ) -> Result<(JointOutput, JointCache<T>)> {
        let (h, encoder) = self.encoder.forward(xs, self.dropout, mode, rng)?;
        let bundle = self.attention.forward(&h)?;
        let penalty = penalization(&bundle.a);
        let (probability, head) = self.head.forward(bundle.m.data())?;
        Ok((
            JointOutput {
                probability,
                penalty,
            },
            JointCache {
                encoder,
                bundle,
                head,
            },
        ))
    }

    pub fn predict(&self, xs: &Matrix<T>) -> Result<(JointOutput, AttentionBundle<T>)> {
        let (out, cache) = self.forward(xs, Mode::Eval, &mut RngState::new(0))?;
        Ok((out, cache.bundle))
    }

    /// `d_p` is `dL/dp` and `d_penalty` is `dL/dP`.
    pub fn backward(
        &self,
        cache: &JointCache<T>,
        d_p: f64,
        d_penalty: f64,
    ) -> Result<(Self, Matrix<f64>)> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, d_p, d_penalty, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn backward_into(
        &self,
        cache: &JointCache<T>,
        d_p: f64,
        d_penalty: f64,
        grads: &mut Self,
    ) -> Result<Matrix<f64>> {
        if grads.config() != self.config() {
            return Err(Error::InvalidState(
                "gradient buffer does not match model".into(),
            ));
        }
        let d_flat = self.head.backward(&cache.head, d_p, &mut grads.head)?;
        let (r, w) = cache.bundle.m.shape();
        let d_m = Matrix::from_vec(r, w, d_flat)
            .map_err(|_| Error::InvalidState("joint cache shape mismatch".into()))?;
        let d_a_pen = if d_penalty != 0.0 {
            let mut g = penalization_grad(&cache.bundle.a);
            g.scale(d_penalty);
            Some(g)
        } else {
            None
        };
        let d_h =
            self.attention
                .backward(&cache.bundle, &d_m, d_a_pen.as_ref(), &mut grads.attention)?;
        self.encoder
            .backward(&cache.encoder, &d_h, &mut grads.encoder)
    }
}

impl<T: Scalar> Parameters<T> for JointModel<T> {
    fn params(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = self.encoder.params("encoder");
        out.push(("attention.ws1".into(), &self.attention.ws1));
        out.push(("attention.ws2".into(), &self.attention.ws2));
        out.push(("head.fc.weight".into(), &self.head.fc_weight));
        out.push(("head.fc.bias".into(), &self.head.fc_bias));
        out.push(("head.out.weight".into(), &self.head.out.weight));
        out.push(("head.out.bias".into(), &self.head.out.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = self.encoder.params_mut("encoder");
        out.push(("attention.ws1".into(), &mut self.attention.ws1));
        out.push(("attention.ws2".into(), &mut self.attention.ws2));
        out.push(("head.fc.weight".into(), &mut self.head.fc_weight));
        out.push(("head.fc.bias".into(), &mut self.head.fc_bias));
        out.push(("head.out.weight".into(), &mut self.head.out.weight));
        out.push(("head.out.bias".into(), &mut self.head.out.bias));
        out
    }

    fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            attention: self.attention.zeros_like(),
            head: self.head.zeros_like(),
            dropout: self.dropout,
        }
    }
}

/// Eval-mode scoring shared by both classifiers: returns the probability and
/// the attention penalty (zero for models without attention).
pub trait SequenceClassifier<T: Scalar>: Sync {
    fn score(&self, xs: &Matrix<T>) -> Result<(f64, f64)>;
}

impl<T: Scalar> SequenceClassifier<T> for LstmClassifier<T> {
    fn score(&self, xs: &Matrix<T>) -> Result<(f64, f64)> {
        Ok((self.predict(xs)?, 0.0))
    }
}

impl<T: Scalar> SequenceClassifier<T> for JointModel<T> {
    fn score(&self, xs: &Matrix<T>) -> Result<(f64, f64)> {
        let (out, _) = self.predict(xs)?;
        Ok((out.probability, out.penalty))
    }
}

fn check_dropout(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "dropout probability {p} outside [0, 1)"
        )))
    }
}

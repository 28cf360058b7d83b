use std::fmt;
use std::io::Write;
use std::ops::ControlFlow;

use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::evaluation::{embed_example, predict_label, score_examples};
use crate::networks::{JointModel, LstmClassifier, Mode, SequenceClassifier};
use crate::numerics::{Parameters, RngState, Scalar};
use crate::text::{CleanExample, Language};

use super::adam::AdamState;
use super::checkpoint::Checkpoint;
use super::hyperparams::Hyperparams;
use super::loss::bce_loss;

const SHUFFLE_TAG: u64 = 0x5348;
const DROPOUT_TAG: u64 = 0x4452;

/// One language's frozen embedding table with its training and validation
/// examples.
#[derive(Clone, Copy, Debug)]
pub struct LanguageData<'a, T> {
    pub language: Language,
    pub table: &'a EmbeddingTable<T>,
    pub train: &'a [CleanExample],
    pub val: &'a [CleanExample],
}

impl<T: Scalar> LanguageData<'_, T> {
    fn validate(&self, embed_dim: usize) -> Result<()> {
        if self.table.dim() != embed_dim {
            return Err(Error::invalid(format!(
                "{} embeddings have width {}, model expects {embed_dim}",
                self.language,
                self.table.dim()
            )));
        }
        if self.train.is_empty() || self.val.is_empty() {
            return Err(Error::invalid(format!(
                "{} training and validation sets must be non-empty",
                self.language
            )));
        }
        for ex in self.train.iter().chain(self.val) {
            if ex.language != self.language {
                return Err(Error::invalid(format!(
                    "example {} is {}, expected {}",
                    ex.id, ex.language, self.language
                )));
            }
            if ex.tokens.is_empty() {
                return Err(Error::invalid(format!("example {} has no tokens", ex.id)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

/// Eval-mode loss and accuracy on one split after an epoch; epoch 0 is the
/// initialization. For joint runs the loss includes the language's weighted
/// mean penalty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub split: Split,
    pub language: Language,
    pub loss: f64,
    pub accuracy: f64,
}

/// Loss terms of one joint optimizer step, measured in train mode on the
/// parameters before the update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub bce_hindi: f64,
    pub bce_bengali: f64,
    pub penalty_hindi: f64,
    pub penalty_bengali: f64,
    pub total: f64,
}

pub fn write_train_log<W: Write>(out: &mut W, log: &[TrainLogRecord]) -> std::io::Result<()> {
    writeln!(out, "epoch,split,language,loss,accuracy")?;
    for r in log {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.split, r.language, r.loss, r.accuracy
        )?;
    }
    Ok(())
}

pub fn write_step_log<W: Write>(out: &mut W, steps: &[StepRecord]) -> std::io::Result<()> {
    writeln!(
        out,
        "epoch,step,bce_hindi,bce_bengali,penalty_hindi,penalty_bengali,total"
    )?;
    for s in steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.epoch,
            s.step,
            s.bce_hindi,
            s.bce_bengali,
            s.penalty_hindi,
            s.penalty_bengali,
            s.total
        )?;
    }
    Ok(())
}

/// Dropout generator for one example within one optimizer step.
pub fn example_rng(
    root: &RngState,
    epoch: usize,
    step: usize,
    language: Language,
    index: usize,
) -> RngState {
    root.derive(&[
        DROPOUT_TAG,
        epoch as u64,
        step as u64,
        language.index(),
        index as u64,
    ])
}

fn shuffled_order(
    root: &RngState,
    epoch: usize,
    language: Language,
    cycle: usize,
    n: usize,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    root.derive(&[SHUFFLE_TAG, epoch as u64, language.index(), cycle as u64])
        .shuffle(&mut order);
    order
}

fn split_metrics<T: Scalar, M: SequenceClassifier<T>>(
    model: &M,
    table: &EmbeddingTable<T>,
    examples: &[CleanExample],
    penalty_coef: f64,
) -> Result<(f64, f64)> {
    let scores = score_examples(model, table, examples)?;
    let n = examples.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ((p, pen), ex) in scores.iter().zip(examples) {
        loss += bce_loss(*p, ex.label).0 + penalty_coef * pen;
        correct += usize::from(predict_label(*p) == ex.label);
    }
    Ok((loss / n, correct as f64 / n))
}

fn log_epoch<T: Scalar, M: SequenceClassifier<T>>(
    model: &M,
    data: &LanguageData<'_, T>,
    epoch: usize,
    penalty_coef: f64,
    log: &mut Vec<TrainLogRecord>,
) -> Result<f64> {
    let mut val_accuracy = 0.0;
    for (split, examples) in [(Split::Train, data.train), (Split::Val, data.val)] {
        let (loss, accuracy) = split_metrics(model, data.table, examples, penalty_coef)?;
        info!(
            "epoch {epoch} {} {split}: loss {loss:.5} accuracy {accuracy:.4}",
            data.language
        );
        if split == Split::Val {
            val_accuracy = accuracy;
        }
        log.push(TrainLogRecord {
            epoch,
            split,
            language: data.language,
            loss,
            accuracy,
        });
    }
    Ok(val_accuracy)
}

fn sum_in_order<P: Parameters<T>, T: Scalar>(parts: Vec<P>) -> Result<P> {
    let mut iter = parts.into_iter();
    let mut acc = iter.next().ok_or_else(|| Error::invalid("empty batch"))?;
    for g in iter {
        acc.add_assign(&g)?;
    }
    Ok(acc)
}

/// Batches are split into this many contiguous shards, each accumulated
/// sequentially and then summed in shard order, so results do not depend on
/// the thread count.
const GRAD_SHARDS: usize = 4;

fn shard_size(batch: usize) -> usize {
    batch.div_ceil(GRAD_SHARDS).max(1)
}

fn non_finite(epoch: usize, step: usize, what: &str, value: f64) -> Error {
    Error::NonFinite(format!("epoch {epoch} batch {step}: {what} is {value}"))
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome<T> {
    /// Parameters from the epoch with the best validation accuracy.
    pub model: LstmClassifier<T>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
    pub log: Vec<TrainLogRecord>,
}

/// Records logged at the end of one epoch.
pub struct EpochView<'a> {
    pub epoch: usize,
    pub records: &'a [TrainLogRecord],
}

/// Trains the LSTM classifier on one language with frozen embeddings,
/// starting from `model` (fresh or transferred).
pub fn train_baseline<T: Scalar>(
    model: LstmClassifier<T>,
    data: &LanguageData<'_, T>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<BaselineOutcome<T>> {
    train_baseline_with(model, data, hp, seed, |_| ControlFlow::Continue(()))
}

/// As [`train_baseline`], calling `on_epoch` after each epoch's records are
/// logged; `Break` ends training after that epoch.
pub fn train_baseline_with<T, F>(
    mut model: LstmClassifier<T>,
    data: &LanguageData<'_, T>,
    hp: &Hyperparams,
    seed: u64,
    mut on_epoch: F,
) -> Result<BaselineOutcome<T>>
where
    T: Scalar,
    F: FnMut(&EpochView<'_>) -> ControlFlow<()>,
{
    hp.validate()?;
    data.validate(model.lstm.input_size())?;
    model.dropout = hp.dropout;
    let root = RngState::new(seed);
    let mut adam = AdamState::<T>::new(hp.learning_rate);
    let mut log = Vec::new();
    log_epoch(&model, data, 0, 0.0, &mut log)?;
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY);
    let mut epochs_run = 0;

    for epoch in 1..=hp.epochs {
        let order = shuffled_order(&root, epoch, data.language, 0, data.train.len());
        for (step, batch) in order.chunks(hp.batch_size).enumerate() {
            let parts = batch
                .par_chunks(shard_size(batch.len()))
                .map(|chunk| {
                    let mut grads = model.zeros_like();
                    let mut losses = Vec::with_capacity(chunk.len());
                    for &i in chunk {
                        let ex = &data.train[i];
                        let xs = embed_example(data.table, ex)?;
                        let mut rng = example_rng(&root, epoch, step, data.language, i);
                        let (p, cache) = model.forward(&xs, Mode::Train, &mut rng)?;
                        let (loss, d_p) = bce_loss(p, ex.label);
                        model.backward_into(&cache, d_p, &mut grads)?;
                        losses.push(loss);
                    }
                    Ok((grads, losses))
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = parts.iter().flat_map(|(_, l)| l).sum::<f64>() / batch.len() as f64;
            if !loss.is_finite() {
                return Err(non_finite(epoch, step, "loss", loss));
            }
            let mut grads = sum_in_order(parts.into_iter().map(|(g, _)| g).collect())?;
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut model, &grads)?;
            debug!("epoch {epoch} step {step}: loss {loss:.6}");
        }
        if !model.all_finite() {
            return Err(non_finite(epoch, 0, "a parameter", f64::NAN));
        }
        let start = log.len();
        let val_accuracy = log_epoch(&model, data, epoch, 0.0, &mut log)?;
        if val_accuracy > best.2 {
            best = (model.clone(), epoch, val_accuracy);
        }
        epochs_run = epoch;
        let view = EpochView {
            epoch,
            records: &log[start..],
        };
        if on_epoch(&view).is_break() {
            break;
        }
    }
    Ok(BaselineOutcome {
        model: best.0,
        best_epoch: best.1,
        best_val_accuracy: best.2,
        epochs_run,
        log,
    })
}

/// Baseline model for a new language: recurrent and head tensors copied
/// from a baseline checkpoint, paired with the target embedding table.
pub fn transfer_init(
    source: &Checkpoint,
    target: &EmbeddingTable<f32>,
) -> Result<LstmClassifier<f32>> {
    let model = source.baseline_model()?;
    if target.dim() != model.lstm.input_size() {
        return Err(Error::IncompatibleCheckpoint {
            offenders: vec![format!(
                "lstm.0.w_ih (input width {}, target embedding width {})",
                model.lstm.input_size(),
                target.dim()
            )],
        });
    }
    Ok(model)
}

/// Yields index batches over one corpus, reshuffling and starting over when
/// exhausted if `recycle` is set.
struct BatchCursor {
    language: Language,
    n: usize,
    order: Vec<usize>,
    pos: usize,
    cycle: usize,
}

impl BatchCursor {
    fn new(root: &RngState, epoch: usize, language: Language, n: usize) -> Self {
        Self {
            language,
            n,
            order: shuffled_order(root, epoch, language, 0, n),
            pos: 0,
            cycle: 0,
        }
    }

    fn take(&mut self, root: &RngState, epoch: usize, size: usize, recycle: bool) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.pos == self.n {
                if !recycle {
                    break;
                }
                self.cycle += 1;
                info!(
                    "epoch {epoch}: {} corpus exhausted, reshuffling (cycle {})",
                    self.language, self.cycle
                );
                self.order = shuffled_order(root, epoch, self.language, self.cycle, self.n);
                self.pos = 0;
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        batch
    }
}

/// Gradient contribution of one language's batch under the joint objective.
struct BatchTerms<T> {
    grads: JointModel<T>,
    bce: f64,
    penalty: f64,
}

fn joint_batch<T: Scalar>(
    model: &JointModel<T>,
    data: &LanguageData<'_, T>,
    batch: &[usize],
    root: &RngState,
    epoch: usize,
    step: usize,
    penalty_coef: f64,
) -> Result<BatchTerms<T>> {
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .par_chunks(shard_size(batch.len()))
        .map(|chunk| {
            let mut grads = model.zeros_like();
            let mut terms = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let ex = &data.train[i];
                let xs = embed_example(data.table, ex)?;
                let mut rng = example_rng(root, epoch, step, data.language, i);
                let (out, cache) = model.forward(&xs, Mode::Train, &mut rng)?;
                let (loss, d_p) = bce_loss(out.probability, ex.label);
                model.backward_into(&cache, d_p * scale, penalty_coef * scale, &mut grads)?;
                terms.push((loss, out.penalty));
            }
            Ok((grads, terms))
        })
        .collect::<Result<Vec<_>>>()?;
    let bce = parts.iter().flat_map(|p| &p.1).map(|t| t.0).sum::<f64>() * scale;
    let penalty = parts.iter().flat_map(|p| &p.1).map(|t| t.1).sum::<f64>() * scale;
    let grads = sum_in_order(parts.into_iter().map(|p| p.0).collect())?;
    Ok(BatchTerms {
        grads,
        bce,
        penalty,
    })
}

/// Everything an observer may inspect about one joint step.
pub struct JointStepView<'a, T> {
    /// Parameters the step's losses and gradients were computed with.
    pub model: &'a JointModel<T>,
    pub hindi_batch: &'a [usize],
    pub bengali_batch: &'a [usize],
    pub record: &'a StepRecord,
    pub root: &'a RngState,
}

#[derive(Clone, Debug)]
pub struct JointOutcome<T> {
    /// Parameters from the epoch with the best mean validation accuracy.
    pub model: JointModel<T>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
    pub log: Vec<TrainLogRecord>,
    pub steps: Vec<StepRecord>,
}

pub fn train_joint<T: Scalar>(
    model: JointModel<T>,
    hindi: &LanguageData<'_, T>,
    bengali: &LanguageData<'_, T>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<JointOutcome<T>> {
    train_joint_with(
        model,
        hindi,
        bengali,
        hp,
        seed,
        |_| {},
        |_| ControlFlow::Continue(()),
    )
}

/// Joint dual-input training: each optimizer step consumes one Hindi and one
/// Bengali batch and minimizes
/// `BCE_h + BCE_b + penalty_coef · (P̄_h + P̄_b)`.
/// An epoch covers the longer corpus once; the shorter one is recycled.
/// `on_step` sees every step before its update; `on_epoch` may end training.
pub fn train_joint_with<T, S, E>(
    mut model: JointModel<T>,
    hindi: &LanguageData<'_, T>,
    bengali: &LanguageData<'_, T>,
    hp: &Hyperparams,
    seed: u64,
    mut on_step: S,
    mut on_epoch: E,
) -> Result<JointOutcome<T>>
where
    T: Scalar,
    S: FnMut(&JointStepView<'_, T>),
    E: FnMut(&EpochView<'_>) -> ControlFlow<()>,
{
    hp.validate()?;
    if hindi.language != Language::Hindi || bengali.language != Language::Bengali {
        return Err(Error::invalid(
            "joint training expects Hindi and Bengali data in that order",
        ));
    }
    hindi.validate(model.encoder.input_size())?;
    bengali.validate(model.encoder.input_size())?;
    model.dropout = hp.dropout;
    let root = RngState::new(seed);
    let mut adam = AdamState::<T>::new(hp.learning_rate);
    let mut log = Vec::new();
    let mut steps = Vec::new();
    let coef = hp.penalty_coef;

    for data in [hindi, bengali] {
        log_epoch(&model, data, 0, coef, &mut log)?;
    }
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY);
    let mut epochs_run = 0;

    let longest = hindi.train.len().max(bengali.train.len());
    let steps_per_epoch = longest.div_ceil(hp.batch_size);
    for epoch in 1..=hp.epochs {
        let mut cursors = [
            BatchCursor::new(&root, epoch, Language::Hindi, hindi.train.len()),
            BatchCursor::new(&root, epoch, Language::Bengali, bengali.train.len()),
        ];
        for step in 0..steps_per_epoch {
            let mut batches = Vec::with_capacity(2);
            for (cursor, data) in cursors.iter_mut().zip([hindi, bengali]) {
                let recycle = data.train.len() < longest;
                let size = hp.batch_size.min(data.train.len());
                batches.push(cursor.take(&root, epoch, size, recycle));
            }
            let h = joint_batch(&model, hindi, &batches[0], &root, epoch, step, coef)?;
            let b = joint_batch(&model, bengali, &batches[1], &root, epoch, step, coef)?;
            let total = h.bce + b.bce + coef * (h.penalty + b.penalty);
            if !total.is_finite() {
                return Err(non_finite(epoch, step, "joint loss", total));
            }
            let record = StepRecord {
                epoch,
                step,
                bce_hindi: h.bce,
                bce_bengali: b.bce,
                penalty_hindi: h.penalty,
                penalty_bengali: b.penalty,
                total,
            };
            on_step(&JointStepView {
                model: &model,
                hindi_batch: &batches[0],
                bengali_batch: &batches[1],
                record: &record,
                root: &root,
            });
            let mut grads = h.grads;
            grads.add_assign(&b.grads)?;
            adam.step(&mut model, &grads)?;
            debug!("epoch {epoch} step {step}: joint loss {total:.6}");
            steps.push(record);
        }
        if !model.all_finite() {
            return Err(non_finite(epoch, 0, "a parameter", f64::NAN));
        }
        let start = log.len();
        let mut val_accuracy = 0.0;
        for data in [hindi, bengali] {
            val_accuracy += log_epoch(&model, data, epoch, coef, &mut log)?;
        }
        val_accuracy /= 2.0;
        if val_accuracy > best.2 {
            best = (model.clone(), epoch, val_accuracy);
        }
        epochs_run = epoch;
        if on_epoch(&EpochView {
            epoch,
            records: &log[start..],
        })
        .is_break()
        {
            break;
        }
    }
    Ok(JointOutcome {
        model: best.0,
        best_epoch: best.1,
        best_val_accuracy: best.2,
        epochs_run,
        log,
        steps,
    })
}

//! Confusion-matrix metrics, checkpoint evaluation and attention export.

mod attention;
mod metrics;

use rayon::prelude::*;

pub use attention::{
    attention_records, mean_pairwise_cosine, render_html, write_attention, AttentionVisualization,
};
pub use metrics::{
    compute_metrics, predict_label, ClassMetrics, ConfusionCounts, MetricsReport,
    DECISION_THRESHOLD,
};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::networks::SequenceClassifier;
use crate::numerics::{Matrix, Scalar};
use crate::text::{CleanExample, Language};
use crate::training::{Checkpoint, ModelKind};

/// Embedding rows for an example's tokens; unknown tokens get zero rows.
pub fn embed_example<T: Scalar>(
    table: &EmbeddingTable<T>,
    example: &CleanExample,
) -> Result<Matrix<T>> {
    if example.tokens.is_empty() {
        return Err(Error::invalid(format!(
            "example {} has no tokens",
            example.id
        )));
    }
    Ok(table.lookup(&example.tokens))
}

/// Eval-mode `(probability, penalty)` for every example, in input order.
pub fn score_examples<T, M>(
    model: &M,
    table: &EmbeddingTable<T>,
    examples: &[CleanExample],
) -> Result<Vec<(f64, f64)>>
where
    T: Scalar,
    M: SequenceClassifier<T>,
{
    examples
        .par_iter()
        .map(|ex| model.score(&embed_example(table, ex)?))
        .collect()
}

pub fn evaluate_model<T, M>(
    model: &M,
    table: &EmbeddingTable<T>,
    examples: &[CleanExample],
) -> Result<MetricsReport>
where
    T: Scalar,
    M: SequenceClassifier<T>,
{
    let scores = score_examples(model, table, examples)?;
    let probs: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    compute_metrics(&ConfusionCounts::from_probabilities(&probs, &labels)?)
}

/// Evaluates a checkpoint of either kind on one language's examples after
/// verifying the table's vocabulary against the checkpoint.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    language: Language,
    table: &EmbeddingTable<f32>,
    examples: &[CleanExample],
) -> Result<MetricsReport> {
    checkpoint.check_vocabulary(language, table)?;
    if let Some(bad) = examples.iter().find(|e| e.language != language) {
        return Err(Error::invalid(format!(
            "example {} is {}, expected {language}",
            bad.id, bad.language
        )));
    }
    match checkpoint.kind {
        ModelKind::Baseline => evaluate_model(&checkpoint.baseline_model()?, table, examples),
        ModelKind::Joint => evaluate_model(&checkpoint.joint_model()?, table, examples),
    }
}

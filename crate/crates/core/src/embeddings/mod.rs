//! Vocabulary construction, frequency subsampling and skip-gram training of
//! the frozen embedding tables.

mod skipgram;
mod table;
mod vocab;

pub use skipgram::{
    generate_pairs, generate_pairs_with, keep_probability, train_word2vec, SkipGramConfig,
    SkipGramPair, Word2VecModel, SUBSAMPLE_THRESHOLD,
};
pub use table::{cosine, EmbeddingTable};
pub use vocab::{vocabulary_hash, Vocabulary};

/// Writes the per-epoch loss trace as `epoch,loss` CSV.
pub fn write_loss_trace<W: std::io::Write>(out: &mut W, trace: &[f64]) -> std::io::Result<()> {
    writeln!(out, "epoch,loss")?;
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(out, "{},{}", epoch + 1, loss)?;
    }
    Ok(())
}

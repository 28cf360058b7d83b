//! Normalization, tokenization, emoji/hashtag statistics, class-balanced
//! sampling and seeded splitting.

mod corpus;
mod io;
mod normalize;
mod sampling;

pub use corpus::{
    clean_records, corpus_stats, extract_emojis, extract_hashtags, ClassCounts, CleanExample,
    CorpusStats, LabelMap, Language, RankedCount, RawRecord,
};
pub use io::{
    parse_clean_tsv, parse_raw_tsv, read_clean_tsv, read_raw_tsv, save_clean_tsv, write_clean_tsv,
};
pub use normalize::{EmojiBlocks, Normalizer, StopWords};
pub use sampling::{balanced_subsample, split, Sample, Splits};

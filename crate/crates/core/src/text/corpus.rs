use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::normalize::{EmojiBlocks, Normalizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Hindi,
    Bengali,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Hindi, Language::Bengali];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Hindi => "hindi",
            Language::Bengali => "bengali",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Language::Hindi => 0,
            Language::Bengali => 1,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hindi" | "hi" => Ok(Language::Hindi),
            "bengali" | "bn" => Ok(Language::Bengali),
            other => Err(Error::parse(
                "language",
                format!("unknown language {other:?}"),
            )),
        }
    }
}

/// One input row as read from the raw corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub body: String,
    pub label: String,
    pub language: Language,
}

/// Tokenized example with a binary label (1 = hate/offensive).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: u8,
    pub language: Language,
}

/// Maps corpus label text to the binary target.
#[derive(Clone, Debug)]
pub struct LabelMap {
    positive: Vec<String>,
    negative: Vec<String>,
}

impl Default for LabelMap {
    /// `HOF`/`hate`/`1` → 1, `NOT`/`nothate`/`0` → 0, case-insensitive.
    fn default() -> Self {
        Self::new(["hof", "hate", "1"], ["not", "nothate", "0"])
    }
}

impl LabelMap {
    pub fn new<P, N>(positive: P, negative: N) -> Self
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let norm = |s: &str| s.trim().to_lowercase();
        Self {
            positive: positive.into_iter().map(|s| norm(s.as_ref())).collect(),
            negative: negative.into_iter().map(|s| norm(s.as_ref())).collect(),
        }
    }

    pub fn bit(&self, label: &str) -> Result<u8> {
        let l = label.trim().to_lowercase();
        if self.positive.contains(&l) {
            Ok(1)
        } else if self.negative.contains(&l) {
            Ok(0)
        } else {
            Err(Error::parse(
                "label",
                format!("label {label:?} is not in the declared label set"),
            ))
        }
    }
}

/// Per-class counts: `positive` is label 1, `negative` label 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: u64,
    pub negative: u64,
}

impl ClassCounts {
    pub fn add(&mut self, label: u8, n: u64) {
        if label == 1 {
            self.positive += n;
        } else {
            self.negative += n;
        }
    }

    pub fn total(&self) -> u64 {
        self.positive + self.negative
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCount {
    pub item: String,
    pub total: u64,
    pub positive: u64,
    pub negative: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub emoji: BTreeMap<String, ClassCounts>,
    pub hashtags: BTreeMap<String, ClassCounts>,
    pub emoji_totals: ClassCounts,
    pub hashtag_totals: ClassCounts,
    pub class_totals: ClassCounts,
    pub positive_proportion: f64,
    pub negative_proportion: f64,
    /// Hashtags by descending total, ties by name.
    pub top_hashtags: Vec<RankedCount>,
    /// Emoji by descending total, ties by code point.
    pub top_emoji: Vec<RankedCount>,
}

/// Counts every code point inside the configured emoji blocks, attributed to
/// the record's class.
pub fn extract_emojis(
    records: &[RawRecord],
    labels: &LabelMap,
    blocks: &EmojiBlocks,
) -> Result<BTreeMap<String, ClassCounts>> {
    let mut counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for r in records {
        let bit = labels.bit(&r.label)?;
        for c in r.body.chars().filter(|&c| blocks.contains(c)) {
            counts.entry(c.to_string()).or_default().add(bit, 1);
        }
    }
    Ok(counts)
}

pub fn extract_hashtags(
    records: &[RawRecord],
    labels: &LabelMap,
    normalizer: &Normalizer,
) -> Result<BTreeMap<String, ClassCounts>> {
    let mut counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for r in records {
        let bit = labels.bit(&r.label)?;
        for tok in normalizer.normalize_and_tokenize(&r.body) {
            if tok.starts_with('#') {
                counts.entry(tok).or_default().add(bit, 1);
            }
        }
    }
    Ok(counts)
}

pub fn corpus_stats(
    records: &[RawRecord],
    labels: &LabelMap,
    normalizer: &Normalizer,
) -> Result<CorpusStats> {
    let emoji = extract_emojis(records, labels, &normalizer.emoji)?;
    let hashtags = extract_hashtags(records, labels, normalizer)?;
    let mut class_totals = ClassCounts::default();
    for r in records {
        class_totals.add(labels.bit(&r.label)?, 1);
    }
    let total = class_totals.total();
    let (positive_proportion, negative_proportion) = if total == 0 {
        (0.0, 0.0)
    } else {
        let p = class_totals.positive as f64 / total as f64;
        (p, 1.0 - p)
    };
    let sum = |m: &BTreeMap<String, ClassCounts>| {
        m.values().fold(ClassCounts::default(), |mut acc, c| {
            acc.positive += c.positive;
            acc.negative += c.negative;
            acc
        })
    };
    Ok(CorpusStats {
        emoji_totals: sum(&emoji),
        hashtag_totals: sum(&hashtags),
        top_hashtags: ranked(&hashtags),
        top_emoji: ranked(&emoji),
        emoji,
        hashtags,
        class_totals,
        positive_proportion,
        negative_proportion,
    })
}

fn ranked(map: &BTreeMap<String, ClassCounts>) -> Vec<RankedCount> {
    let mut v: Vec<RankedCount> = map
        .iter()
        .map(|(k, c)| RankedCount {
            item: k.clone(),
            total: c.total(),
            positive: c.positive,
            negative: c.negative,
        })
        .collect();
    v.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.item.cmp(&b.item)));
    v
}

/// Tokenizes records, dropping those that clean to nothing. Returns the
/// kept examples and the number dropped.
pub fn clean_records(
    records: &[RawRecord],
    labels: &LabelMap,
    normalizer: &Normalizer,
) -> Result<(Vec<CleanExample>, usize)> {
    let mut out = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for r in records {
        let tokens = normalizer.normalize_and_tokenize(&r.body);
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        out.push(CleanExample {
            id: r.id.clone(),
            tokens,
            label: labels.bit(&r.label)?,
            language: r.language,
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} records that cleaned to zero tokens");
    }
    Ok((out, dropped))
}

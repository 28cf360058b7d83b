use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Word ↔ index map with absolute counts and relative frequencies.
///
/// Indices are ordered by descending count, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    pub fn build<'a, I, D>(documents: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut freq: HashMap<&'a str, u64> = HashMap::new();
        for doc in documents {
            for w in doc {
                *freq.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = freq
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let words: Vec<String> = entries.iter().map(|(w, _)| w.to_string()).collect();
        let counts: Vec<u64> = entries.iter().map(|&(_, c)| c).collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self {
            total: counts.iter().sum(),
            words,
            index,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn index_of(&self, word: &str) -> Result<usize> {
        self.get(word)
            .ok_or_else(|| Error::NotFound(format!("word {word:?} not in vocabulary")))
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    /// Relative frequency `count(w) / Σ counts`.
    pub fn relative_frequency(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.total as f64
    }

    /// In-vocabulary indices of `tokens`; out-of-vocabulary tokens are skipped.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.get(t)).collect()
    }

    pub fn hash(&self) -> String {
        vocabulary_hash(&self.words)
    }
}

/// SHA-256 over the index-ordered word list, hex encoded.
pub fn vocabulary_hash(words: &[String]) -> String {
    let mut h = Sha256::new();
    for w in words {
        h.update(w.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

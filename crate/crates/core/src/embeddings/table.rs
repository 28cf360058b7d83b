use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Scalar};

use super::vocab::vocabulary_hash;
use super::{Vocabulary, Word2VecModel};

/// Frozen `V×d` lookup table with its word list.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<T> {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(words: Vec<String>, vectors: Matrix<T>) -> Result<Self> {
        if words.len() != vectors.rows() {
            return Err(Error::invalid(format!(
                "{} words for {} embedding rows",
                words.len(),
                vectors.rows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.contains(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid embedding word {w:?}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate embedding word {w:?}")));
            }
        }
        Ok(Self {
            words,
            index,
            vectors,
        })
    }

    pub fn from_model(vocab: &Vocabulary, model: &Word2VecModel<T>) -> Result<Self> {
        Self::new(vocab.words().to_vec(), model.input.clone())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Matrix<T> {
        &self.vectors
    }

    pub fn vocab_hash(&self) -> String {
        vocabulary_hash(&self.words)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// `n×d` input matrix for a token sequence; unknown tokens map to zero rows.
    pub fn lookup(&self, tokens: &[String]) -> Matrix<T> {
        let d = self.dim();
        let mut out = Matrix::zeros(tokens.len(), d);
        for (r, t) in tokens.iter().enumerate() {
            if let Some(i) = self.get(t) {
                out.row_mut(r).copy_from_slice(self.vectors.row(i));
            }
        }
        out
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine(self.vectors.row(a), self.vectors.row(b))
    }

    /// The `k` most cosine-similar words to `word`, excluding the query.
    pub fn nearest_neighbors(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let q = self
            .get(word)
            .ok_or_else(|| Error::NotFound(format!("word {word:?} not in embedding table")))?;
        if k >= self.len() {
            return Err(Error::invalid(format!(
                "k = {k} must be smaller than the vocabulary size {}",
                self.len()
            )));
        }
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .filter(|&i| i != q)
            .map(|i| (i, self.cosine(q, i)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, c)| (self.words[i].clone(), c))
            .collect())
    }

    /// Text export: `V d` header, then `word v1 … vd` per line. Values use
    /// the shortest decimal that round-trips exactly.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim())?;
        for (i, w) in self.words.iter().enumerate() {
            write!(out, "{w}")?;
            for v in self.vectors.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_text<R: Read>(input: R) -> Result<Self> {
        let ctx = |line: usize| format!("embedding file line {line}");
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(ctx(1), "missing header"))?
            .map_err(|e| Error::parse(ctx(1), e.to_string()))?;
        let mut parts = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| Error::parse(ctx(1), format!("missing {name}")))?
                .parse()
                .map_err(|e| Error::parse(ctx(1), format!("{name}: {e}")))
        };
        let (v, d) = (field("vocabulary size")?, field("dimension")?);
        let mut words = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::parse(ctx(i + 2), e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let word = parts.next().unwrap_or_default().to_string();
            let before = data.len();
            for p in parts {
                data.push(
                    p.parse::<T>()
                        .map_err(|_| Error::parse(ctx(i + 2), format!("bad value {p:?}")))?,
                );
            }
            if data.len() - before != d {
                return Err(Error::parse(
                    ctx(i + 2),
                    format!("expected {d} values, found {}", data.len() - before),
                ));
            }
            words.push(word);
        }
        if words.len() != v {
            return Err(Error::parse(
                "embedding file",
                format!("header declares {v} words, found {}", words.len()),
            ));
        }
        Self::new(words, Matrix::from_vec(v, d, data)?)
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(file)
    }

    pub fn convert<U: Scalar>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            words: self.words.clone(),
            index: self.index.clone(),
            vectors: self.vectors.convert(),
        }
    }
}

pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

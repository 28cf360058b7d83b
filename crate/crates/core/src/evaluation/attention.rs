use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::embeddings::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::networks::JointModel;
use crate::numerics::Scalar;
use crate::text::{CleanExample, Language};

use super::embed_example;
use super::metrics::predict_label;

/// Attention weights of selected hops over one sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttentionVisualization {
    pub id: String,
    pub language: Language,
    pub tokens: Vec<String>,
    pub hops: Vec<usize>,
    /// One row per selected hop, each of length `tokens.len()`.
    pub weights: Vec<Vec<f64>>,
    pub probability: f64,
    pub confidence: f64,
    pub predicted: u8,
    pub label: u8,
    /// Mean pairwise cosine similarity between the selected hop vectors;
    /// absent with fewer than two hops.
    pub redundancy: Option<f64>,
}

/// Mean cosine similarity over all unordered pairs of rows.
pub fn mean_pairwise_cosine(rows: &[Vec<f64>]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            total += cosine(&rows[i], &rows[j]);
            pairs += 1;
        }
    }
    Some(total / pairs as f64)
}

/// Scores every example and keeps those whose confidence `max(p, 1 − p)`
/// strictly exceeds `min_confidence`.
pub fn attention_records<T: Scalar>(
    model: &JointModel<T>,
    table: &EmbeddingTable<T>,
    language: Language,
    examples: &[CleanExample],
    hops: &[usize],
    min_confidence: f64,
) -> Result<Vec<AttentionVisualization>> {
    if hops.is_empty() {
        return Err(Error::invalid("at least one hop index is required"));
    }
    let r = model.attention.hops();
    if let Some(&bad) = hops.iter().find(|&&h| h >= r) {
        return Err(Error::invalid(format!(
            "hop index {bad} out of range (model has {r} hops)"
        )));
    }
    let mut out = Vec::new();
    for ex in examples {
        let xs = embed_example(table, ex)?;
        let (result, bundle) = model.predict(&xs)?;
        let p = result.probability;
        let confidence = p.max(1.0 - p);
        if confidence <= min_confidence {
            continue;
        }
        let weights: Vec<Vec<f64>> = hops
            .iter()
            .map(|&h| bundle.a.row(h).iter().map(|w| w.as_f64()).collect())
            .collect();
        out.push(AttentionVisualization {
            id: ex.id.clone(),
            language,
            tokens: ex.tokens.clone(),
            hops: hops.to_vec(),
            redundancy: mean_pairwise_cosine(&weights),
            weights,
            probability: p,
            confidence,
            predicted: predict_label(p),
            label: ex.label,
        });
    }
    Ok(out)
}

fn file_stem(id: &str, language: Language) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("attn_{safe}_{language}")
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Standalone heatmap page: one line per hop, each token shaded with opacity
/// proportional to its weight relative to the hop's maximum.
pub fn render_html(v: &AttentionVisualization) -> String {
    let mut html = String::new();
    let title = escape_html(&format!("attention {} ({})", v.id, v.language));
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head>\n\
         <body style=\"font-family:sans-serif;background:#fff;color:#111\">\n<h1 style=\"font-size:1.1em\">{title}</h1>\n\
         <p>p = {:.4}, confidence = {:.4}, predicted = {}, label = {}",
        v.probability, v.confidence, v.predicted, v.label
    );
    if let Some(r) = v.redundancy {
        let _ = write!(html, ", redundancy = {r:.4}");
    }
    html.push_str("</p>\n<table style=\"border-collapse:collapse\">\n");
    for (hop, row) in v.hops.iter().zip(&v.weights) {
        let max = row.iter().cloned().fold(0.0f64, f64::max);
        let _ = write!(
            html,
            "<tr><td style=\"padding:4px 8px;color:#666\">hop {hop}</td><td style=\"padding:4px\">"
        );
        for (token, w) in v.tokens.iter().zip(row) {
            let alpha = if max > 0.0 { w / max } else { 0.0 };
            let _ = write!(
                html,
                "<span title=\"{w:.4}\" style=\"background:rgba(220,40,40,{alpha:.4});padding:2px 3px;margin:1px;display:inline-block\">{}</span>",
                escape_html(token)
            );
        }
        html.push_str("</td></tr>\n");
    }
    html.push_str("</table>\n</body></html>\n");
    html
}

/// Writes `attn_<id>_<lang>.json` and `.html` into `dir`.
pub fn write_attention(dir: &Path, v: &AttentionVisualization) -> Result<(PathBuf, PathBuf)> {
    let stem = file_stem(&v.id, v.language);
    let json_path = dir.join(format!("{stem}.json"));
    let html_path = dir.join(format!("{stem}.html"));
    let json = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    std::fs::write(&html_path, render_html(v)).map_err(|e| Error::io(&html_path, e))?;
    Ok((json_path, html_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::JointConfig;
    use crate::numerics::{init_uniform_xavier, RngState};

    fn fixture() -> (JointModel<f32>, EmbeddingTable<f32>, Vec<CleanExample>) {
        let config = JointConfig {
            input: 4,
            hidden: 3,
            layers: 2,
            dropout: 0.5,
            hops: 6,
            attention_hidden: 5,
            fc_hidden: 7,
        };
        let model = JointModel::new(&config, &mut RngState::new(1)).unwrap();
        let words: Vec<String> = ["a", "b", "c", "<x>"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let table = EmbeddingTable::new(
            words,
            init_uniform_xavier(4, 4, &mut RngState::new(2)).unwrap(),
        )
        .unwrap();
        let ex = |id: &str, toks: &[&str]| CleanExample {
            id: id.into(),
            tokens: toks.iter().map(|s| s.to_string()).collect(),
            label: 1,
            language: Language::Hindi,
        };
        (
            model,
            table,
            vec![
                ex("one", &["a"]),
                ex("long/2", &["a", "b", "c", "<x>", "a"]),
            ],
        )
    }

    #[test]
    fn five_hops_summing_to_one() {
        let (model, table, examples) = fixture();
        let recs = attention_records(
            &model,
            &table,
            Language::Hindi,
            &examples,
            &[0, 1, 2, 3, 4],
            0.0,
        )
        .unwrap();
        assert_eq!(recs.len(), 2);
        for rec in &recs {
            assert_eq!(rec.weights.len(), 5);
            for row in &rec.weights {
                assert_eq!(row.len(), rec.tokens.len());
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-5);
            }
        }
        assert!(recs[0].weights.iter().all(|row| row == &vec![1.0]));
        assert_eq!(recs[0].redundancy, Some(1.0));
    }

    #[test]
    fn hop_out_of_range() {
        let (model, table, examples) = fixture();
        assert!(attention_records(&model, &table, Language::Hindi, &examples, &[6], 0.0).is_err());
        assert!(attention_records(&model, &table, Language::Hindi, &examples, &[], 0.0).is_err());
    }

    #[test]
    fn confidence_filter_is_strict() {
        let (mut model, table, examples) = fixture();
        model.head.out.weight = crate::numerics::Matrix::zeros(1, 7);
        let recs =
            attention_records(&model, &table, Language::Hindi, &examples, &[0], 0.5).unwrap();
        assert!(recs.is_empty());
        let recs =
            attention_records(&model, &table, Language::Hindi, &examples, &[0], 0.49).unwrap();
        assert_eq!(recs.len(), 2);
    }

    #[test]
    fn files_are_written_and_escaped() {
        let (model, table, examples) = fixture();
        let recs =
            attention_records(&model, &table, Language::Hindi, &examples, &[0, 1], 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (json, html) = write_attention(dir.path(), &recs[1]).unwrap();
        assert_eq!(json.file_name().unwrap(), "attn_long_2_hindi.json");
        let page = std::fs::read_to_string(html).unwrap();
        assert!(page.contains("&lt;x&gt;"));
        assert!(!page.contains("<x>"));
        assert!(!page.contains("http"));
        let back: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back["hops"], serde_json::json!([0, 1]));
    }
}

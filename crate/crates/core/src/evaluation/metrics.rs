use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Probability strictly above this maps to class 1.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn predict_label(p: f64) -> u8 {
    u8::from(p > DECISION_THRESHOLD)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut c = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            c.record(p, a);
        }
        Ok(c)
    }

    pub fn from_probabilities(probabilities: &[f64], actual: &[u8]) -> Result<Self> {
        let predicted: Vec<u8> = probabilities.iter().map(|&p| predict_label(p)).collect();
        Self::from_predictions(&predicted, actual)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(hit: u64, false_alarm: u64, miss: u64) -> ClassMetrics {
    let precision = ratio(hit, hit + false_alarm);
    let recall = ratio(hit, hit + miss);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

/// Accuracy plus per-class and macro-averaged precision, recall and F1.
/// Any 0/0 ratio is taken as 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let total = c.total();
    if total == 0 {
        return Err(Error::invalid("no examples to score"));
    }
    let positive = class_metrics(c.tp, c.fp, c.fn_);
    let negative = class_metrics(c.tn, c.fn_, c.fp);
    Ok(MetricsReport {
        accuracy: ratio(c.tp + c.tn, total),
        precision: (positive.precision + negative.precision) / 2.0,
        recall: (positive.recall + negative.recall) / 2.0,
        f1: (positive.f1 + negative.f1) / 2.0,
        positive,
        negative,
        counts: *c,
    })
}

impl MetricsReport {
    pub fn csv_header() -> &'static str {
        "model,accuracy,precision,recall,f1"
    }

    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{model},{:.4},{:.4},{:.4},{:.4}",
            self.accuracy, self.precision, self.recall, self.f1
        )
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, model: &str) -> std::io::Result<()> {
        writeln!(out, "{}", Self::csv_header())?;
        writeln!(out, "{}", self.csv_row(model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn perfect() {
        let r = compute_metrics(&ConfusionCounts {
            tp: 5,
            fp: 0,
            fn_: 0,
            tn: 5,
        })
        .unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn hand_computed() {
        let r = compute_metrics(&ConfusionCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        })
        .unwrap();
        assert!(close(r.accuracy, 0.7));
        assert!(close(r.positive.precision, 0.75));
        assert!(close(r.positive.recall, 0.6));
        assert!(close(r.positive.f1, 0.6667));
        assert!(close(r.negative.precision, 0.6667));
        assert!(close(r.negative.recall, 0.8));
        assert!(close(r.negative.f1, 0.7273));
        assert!(close(r.f1, 0.6970));
    }

    #[test]
    fn constant_predictor() {
        let r = compute_metrics(&ConfusionCounts {
            tp: 5,
            fp: 5,
            fn_: 0,
            tn: 0,
        })
        .unwrap();
        assert_eq!(r.positive.recall, 1.0);
        assert_eq!(r.negative.recall, 0.0);
        assert_eq!(r.negative.precision, 0.0);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn empty_is_invalid() {
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn threshold_tie_goes_to_negative() {
        assert_eq!(predict_label(0.5), 0);
        assert_eq!(predict_label(0.5000001), 1);
    }

    #[test]
    fn csv_row_format() {
        let r = compute_metrics(&ConfusionCounts {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        })
        .unwrap();
        assert_eq!(
            r.csv_row("LSTM-Hindi"),
            "LSTM-Hindi,0.7000,0.7083,0.7000,0.6970"
        );
    }

    proptest! {
        #[test]
        fn relabeling_symmetry(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 1u64..50) {
            let a = compute_metrics(&ConfusionCounts { tp, fp, fn_, tn }).unwrap();
            let b = compute_metrics(&ConfusionCounts { tp: tn, fp: fn_, fn_: fp, tn: tp }).unwrap();
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn bounded(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let r = compute_metrics(&ConfusionCounts { tp, fp, fn_, tn }).unwrap();
            for v in [r.accuracy, r.precision, r.recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

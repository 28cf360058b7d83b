/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Binary cross-entropy of one prediction and its derivative `dL/dp`.
///
/// The derivative is that of the clamped loss: zero where the clamp is active.
pub fn bce_loss(p: f64, y: u8) -> (f64, f64) {
    let lo = PROB_CLAMP;
    let hi = 1.0 - PROB_CLAMP;
    let pc = p.clamp(lo, hi);
    let yf = f64::from(y);
    let loss = -(yf * pc.ln() + (1.0 - yf) * (1.0 - pc).ln());
    let grad = if p < lo || p > hi {
        0.0
    } else {
        -yf / pc + (1.0 - yf) / (1.0 - pc)
    };
    (loss, grad)
}

/// Mean BCE over a batch of `(p, y)`.
pub fn mean_bce(batch: &[(f64, u8)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(|&(p, y)| bce_loss(p, y).0).sum::<f64>() / batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        for y in [0, 1] {
            assert!((bce_loss(0.5, y).0 - std::f64::consts::LN_2).abs() < 1e-12);
        }
        let (l, _) = bce_loss(1.0 - 1e-7, 1);
        assert!((l - 1e-7).abs() < 1e-9, "{l}");
        assert!((bce_loss(0.9, 0).0 - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn clamps_extremes() {
        let (l, g) = bce_loss(0.0, 1);
        assert!(l.is_finite());
        assert_eq!(g, 0.0);
        assert!(bce_loss(1.0, 0).0.is_finite());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        for &(p, y) in &[(0.3, 1u8), (0.8, 0), (0.55, 1)] {
            let h = 1e-6;
            let numeric = (bce_loss(p + h, y).0 - bce_loss(p - h, y).0) / (2.0 * h);
            assert!((bce_loss(p, y).1 - numeric).abs() < 1e-6);
        }
    }

    #[test]
    fn batch_mean() {
        assert!((mean_bce(&[(0.5, 0), (0.5, 1)]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(mean_bce(&[]), 0.0);
    }
}

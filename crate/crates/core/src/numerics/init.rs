use crate::error::{Error, Result};

use super::{Matrix, RngState, Scalar};

/// Xavier/Glorot uniform: entries i.i.d. on `[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn init_uniform_xavier<T: Scalar>(
    rows: usize,
    cols: usize,
    rng: &mut RngState,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "xavier init needs non-zero dimensions, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::cast(rng.uniform_in(-bound, bound)))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let a: Matrix<f32> = init_uniform_xavier(1, 1, &mut RngState::new(7)).unwrap();
        let b: Matrix<f32> = init_uniform_xavier(1, 1, &mut RngState::new(7)).unwrap();
        assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
    }

    #[test]
    fn within_bound() {
        let m: Matrix<f64> = init_uniform_xavier(100, 100, &mut RngState::new(1)).unwrap();
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(m.data().iter().all(|x| x.abs() <= bound));
    }

    #[test]
    fn variance_matches_uniform_law() {
        // Var(U[-a, a]) = a²/3
        let mut rng = RngState::new(11);
        let mut samples = Vec::new();
        for _ in 0..4 {
            let m: Matrix<f64> = init_uniform_xavier(50, 50, &mut rng).unwrap();
            samples.extend_from_slice(m.data());
        }
        assert!(samples.len() >= 10_000);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let expected = (6.0 / 100.0) / 3.0;
        assert!(
            (var - expected).abs() / expected < 0.2,
            "{var} vs {expected}"
        );
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(init_uniform_xavier::<f32>(0, 3, &mut RngState::new(0)).is_err());
        assert!(init_uniform_xavier::<f32>(3, 0, &mut RngState::new(0)).is_err());
    }
}

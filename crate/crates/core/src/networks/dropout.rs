use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngState, Scalar};

/// Inverted-dropout mask: each entry is `0` with probability `p`, otherwise
/// `1 / (1 − p)`.
pub fn dropout_mask<T: Scalar>(
    rows: usize,
    cols: usize,
    p: f64,
    rng: &mut RngState,
) -> Result<Matrix<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    let keep = T::cast(1.0 / (1.0 - p));
    let data = (0..rows * cols)
        .map(|_| if rng.uniform() < p { T::zero() } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn apply_mask<T: Scalar>(x: &Matrix<T>, mask: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(x.shape(), mask.shape());
    let data = x
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&a, &m)| a * m)
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape")
}

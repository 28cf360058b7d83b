use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngState, Scalar};

use super::lstm::{LstmStack, StackCache};
use super::Mode;

/// Two independent directional stacks whose top-layer states are
/// concatenated per step: row `t` of the output is `[→h_t ‖ ←h_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm<T> {
    pub forward: LstmStack<T>,
    pub backward: LstmStack<T>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache<T> {
    forward: StackCache<T>,
    backward: StackCache<T>,
}

pub(crate) fn reverse_rows<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.row_mut(m.rows() - 1 - r).copy_from_slice(m.row(r));
    }
    out
}

impl<T: Scalar> BiLstm<T> {
    pub fn new(input: usize, hidden: usize, depth: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            forward: LstmStack::new(input, hidden, depth, rng)?,
            backward: LstmStack::new(input, hidden, depth, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
        }
    }

    /// Per-direction hidden size `u`; the output width is `2u`.
    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.forward.input_size()
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, &Matrix<T>)> {
        let mut out = self.forward.params(&format!("{prefix}.fwd"));
        out.extend(self.backward.params(&format!("{prefix}.bwd")));
        out
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<(String, &mut Matrix<T>)> {
        let mut out = self.forward.params_mut(&format!("{prefix}.fwd"));
        out.extend(self.backward.params_mut(&format!("{prefix}.bwd")));
        out
    }

    pub fn forward(
        &self,
        xs: &Matrix<T>,
        inter_layer_dropout: f64,
        mode: Mode,
        rng: &mut RngState,
    ) -> Result<(Matrix<T>, BiLstmCache<T>)> {
        if self.forward.hidden_size() != self.backward.hidden_size() {
            return Err(Error::invalid("directional stacks differ in hidden size"));
        }
        let (fwd, fwd_cache) = self.forward.forward(xs, inter_layer_dropout, mode, rng)?;
        let (bwd_rev, bwd_cache) =
            self.backward
                .forward(&reverse_rows(xs), inter_layer_dropout, mode, rng)?;
        let bwd = reverse_rows(&bwd_rev);
        let u = self.hidden_size();
        let mut h = Matrix::zeros(xs.rows(), 2 * u);
        for t in 0..xs.rows() {
            let row = h.row_mut(t);
            row[..u].copy_from_slice(fwd.row(t));
            row[u..].copy_from_slice(bwd.row(t));
        }
        Ok((
            h,
            BiLstmCache {
                forward: fwd_cache,
                backward: bwd_cache,
            },
        ))
    }

    /// Gradient on the concatenated output in, gradient on the input out.
    pub fn backward(
        &self,
        cache: &BiLstmCache<T>,
        d_h: &Matrix<f64>,
        grads: &mut BiLstm<T>,
    ) -> Result<Matrix<f64>> {
        let u = self.hidden_size();
        if d_h.cols() != 2 * u {
            return Err(Error::InvalidState("bilstm gradient width mismatch".into()));
        }
        let n = d_h.rows();
        let mut d_fwd = Matrix::<f64>::zeros(n, u);
        let mut d_bwd_rev = Matrix::<f64>::zeros(n, u);
        for t in 0..n {
            d_fwd.row_mut(t).copy_from_slice(&d_h.row(t)[..u]);
            d_bwd_rev
                .row_mut(n - 1 - t)
                .copy_from_slice(&d_h.row(t)[u..]);
        }
        let mut dx = self
            .forward
            .backward(&cache.forward, &d_fwd, &mut grads.forward)?;
        let dx_rev = self
            .backward
            .backward(&cache.backward, &d_bwd_rev, &mut grads.backward)?;
        dx.add_assign(&reverse_rows(&dx_rev))?;
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palindrome_with_mirrored_stacks() {
        let mut rng = RngState::new(8);
        let stack = LstmStack::<f64>::new(3, 4, 2, &mut rng).unwrap();
        let bi = BiLstm {
            forward: stack.clone(),
            backward: stack,
        };
        let xs = Matrix::from_rows(&[
            vec![0.1, 0.2, 0.3],
            vec![-0.5, 0.0, 1.0],
            vec![0.7, 0.7, -0.2],
            vec![-0.5, 0.0, 1.0],
            vec![0.1, 0.2, 0.3],
        ])
        .unwrap();
        let (h, _) = bi.forward(&xs, 0.0, Mode::Eval, &mut rng).unwrap();
        let n = xs.rows();
        for t in 0..n {
            assert_eq!(&h.row(t)[..4], &h.row(n - 1 - t)[4..]);
        }
    }

    #[test]
    fn single_step_shape() {
        let mut rng = RngState::new(1);
        let bi = BiLstm::<f32>::new(300, 32, 8, &mut rng).unwrap();
        let (h, _) = bi
            .forward(&Matrix::filled(1, 300, 0.01), 0.5, Mode::Eval, &mut rng)
            .unwrap();
        assert_eq!(h.shape(), (1, 64));
    }
}

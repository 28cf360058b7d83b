use crate::error::{Error, Result};
use crate::numerics::{init_uniform_xavier, Activation, Matrix, RngState, Scalar};

/// Tolerance on the row sums of every produced attention matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// Structured self-attention: `ws1` is `d_a × 2u`, `ws2` is `r × d_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttention<T> {
    pub ws1: Matrix<T>,
    pub ws2: Matrix<T>,
}

/// Everything one attention pass produces for a sequence of length `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBundle<T> {
    /// `n × 2u` encoder states.
    pub h: Matrix<T>,
    /// `d_a × n`, `tanh(ws1 · hᵀ)`.
    pub h_a: Matrix<T>,
    /// `r × n`, row-stochastic.
    pub a: Matrix<T>,
    /// `r × 2u`, `a · h`.
    pub m: Matrix<T>,
}

impl<T: Scalar> SelfAttention<T> {
    pub fn new(width: usize, hidden: usize, hops: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            ws1: init_uniform_xavier(hidden, width, rng)?,
            ws2: init_uniform_xavier(hops, hidden, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            ws1: Matrix::zeros(self.ws1.rows(), self.ws1.cols()),
            ws2: Matrix::zeros(self.ws2.rows(), self.ws2.cols()),
        }
    }

    pub fn hops(&self) -> usize {
        self.ws2.rows()
    }

    pub fn hidden(&self) -> usize {
        self.ws1.rows()
    }

    pub fn width(&self) -> usize {
        self.ws1.cols()
    }

    pub fn forward(&self, h: &Matrix<T>) -> Result<AttentionBundle<T>> {
        if h.cols() != self.width() {
            return Err(Error::invalid(format!(
                "attention expects encoder width {}, got {}",
                self.width(),
                h.cols()
            )));
        }
        if self.ws2.cols() != self.hidden() {
            return Err(Error::invalid("ws2 columns must equal ws1 rows"));
        }
        let h_a = self.ws1.matmul_nt(h)?.elementwise(Activation::Tanh);
        let a = self.ws2.matmul(&h_a)?.softmax_rows()?;
        for r in 0..a.rows() {
            let total: f64 = a.row(r).iter().map(|x| x.as_f64()).sum();
            if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidState(format!(
                    "attention row {r} sums to {total}"
                )));
            }
        }
        let m = a.matmul(h)?;
        Ok(AttentionBundle {
            h: h.clone(),
            h_a,
            a,
            m,
        })
    }

    /// Backward through `M = A·H`, the softmax and both projections.
    ///
    /// `d_a_extra` carries any gradient reaching `A` directly (the
    /// penalization term). Returns `dL/dH`.
    pub fn backward(
        &self,
        bundle: &AttentionBundle<T>,
        d_m: &Matrix<f64>,
        d_a_extra: Option<&Matrix<f64>>,
        grads: &mut SelfAttention<T>,
    ) -> Result<Matrix<f64>> {
        let (r, n) = bundle.a.shape();
        if r != self.hops() || bundle.h.cols() != self.width() || d_m.shape() != bundle.m.shape() {
            return Err(Error::InvalidState("attention cache does not match".into()));
        }
        let h = bundle.h.convert::<f64>();
        let a = bundle.a.convert::<f64>();
        let h_a = bundle.h_a.convert::<f64>();

        let mut d_a = d_m.matmul_nt(&h)?;
        if let Some(extra) = d_a_extra {
            d_a.add_assign(extra)?;
        }
        let mut d_h = a.matmul_tn(d_m)?;

        let mut d_s = Matrix::<f64>::zeros(r, n);
        for i in 0..r {
            let inner: f64 = d_a.row(i).iter().zip(a.row(i)).map(|(g, p)| g * p).sum();
            for j in 0..n {
                d_s.set(i, j, a.get(i, j) * (d_a.get(i, j) - inner));
            }
        }

        let d_ws2 = d_s.matmul_nt(&h_a)?;
        let d_ha = self.ws2.convert::<f64>().matmul_tn(&d_s)?;
        let d_z = Matrix::from_vec(
            d_ha.rows(),
            d_ha.cols(),
            d_ha.data()
                .iter()
                .zip(h_a.data())
                .map(|(g, y)| g * (1.0 - y * y))
                .collect(),
        )?;
        let d_ws1 = d_z.matmul(&h)?;
        d_h.add_assign(&d_z.matmul_tn(&self.ws1.convert::<f64>())?)?;

        grads.ws1.add_assign(&d_ws1.convert())?;
        grads.ws2.add_assign(&d_ws2.convert())?;
        Ok(d_h)
    }
}

/// Redundancy penalty `‖A·Aᵀ − I‖_F²`.
pub fn penalization<T: Scalar>(a: &Matrix<T>) -> f64 {
    let a = a.convert::<f64>();
    let mut g = a.matmul_nt(&a).expect("square by construction");
    for i in 0..g.rows() {
        g.set(i, i, g.get(i, i) - 1.0);
    }
    g.frobenius_sq()
}

/// `d‖AAᵀ − I‖²/dA = 4 (AAᵀ − I) A`.
pub fn penalization_grad<T: Scalar>(a: &Matrix<T>) -> Matrix<f64> {
    let a = a.convert::<f64>();
    let mut g = a.matmul_nt(&a).expect("square by construction");
    for i in 0..g.rows() {
        g.set(i, i, g.get(i, i) - 1.0);
    }
    let mut out = g.matmul(&a).expect("conformable");
    out.scale(4.0);
    out
}

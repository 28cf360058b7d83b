use crate::error::{Error, Result};
use crate::numerics::{dot, init_uniform_xavier, sigmoid, Matrix, RngState, Scalar};

/// Affine map to one logit followed by a sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead<T> {
    pub weight: Matrix<T>,
    pub bias: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct LinearHeadCache<T> {
    features: Vec<T>,
    p: f64,
}

impl<T: Scalar> LinearHead<T> {
    pub fn new(input: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            weight: init_uniform_xavier(1, input, rng)?,
            bias: Matrix::zeros(1, 1),
        })
    }

    pub fn zeros(input: usize) -> Self {
        Self {
            weight: Matrix::zeros(1, input),
            bias: Matrix::zeros(1, 1),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, features: &[T]) -> Result<(f64, LinearHeadCache<T>)> {
        if features.len() != self.input_size() {
            return Err(Error::invalid(format!(
                "head expects {} features, got {}",
                self.input_size(),
                features.len()
            )));
        }
        let z = dot(self.weight.row(0), features) + self.bias.get(0, 0).as_f64();
        let p = sigmoid(z);
        Ok((
            p,
            LinearHeadCache {
                features: features.to_vec(),
                p,
            },
        ))
    }

    /// Takes `dL/dp`; returns `dL/dfeatures`.
    pub fn backward(
        &self,
        cache: &LinearHeadCache<T>,
        d_p: f64,
        grads: &mut LinearHead<T>,
    ) -> Result<Vec<f64>> {
        if cache.features.len() != self.input_size() {
            return Err(Error::InvalidState("head cache width mismatch".into()));
        }
        let d_z = d_p * cache.p * (1.0 - cache.p);
        grads.weight.add_outer(&[d_z], &cache.features);
        grads.bias.add_outer(&[d_z], &[T::one()]);
        Ok(self
            .weight
            .row(0)
            .iter()
            .map(|w| w.as_f64() * d_z)
            .collect())
    }
}

/// `features → tanh(fc) → linear → sigmoid`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead<T> {
    pub fc_weight: Matrix<T>,
    pub fc_bias: Matrix<T>,
    pub out: LinearHead<T>,
}

#[derive(Clone, Debug)]
pub struct AttentionHeadCache<T> {
    features: Vec<T>,
    hidden: Vec<f64>,
    out: LinearHeadCache<T>,
}

impl<T: Scalar> AttentionHead<T> {
    pub fn new(input: usize, fc: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            fc_weight: init_uniform_xavier(fc, input, rng)?,
            fc_bias: Matrix::zeros(fc, 1),
            out: LinearHead::new(fc, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            fc_weight: Matrix::zeros(self.fc_weight.rows(), self.fc_weight.cols()),
            fc_bias: Matrix::zeros(self.fc_bias.rows(), 1),
            out: LinearHead::zeros(self.out.input_size()),
        }
    }

    pub fn input_size(&self) -> usize {
        self.fc_weight.cols()
    }

    pub fn forward(&self, features: &[T]) -> Result<(f64, AttentionHeadCache<T>)> {
        if features.len() != self.input_size() {
            return Err(Error::invalid(format!(
                "attention head expects {} features, got {}",
                self.input_size(),
                features.len()
            )));
        }
        let mut z: Vec<f64> = self.fc_bias.data().iter().map(|b| b.as_f64()).collect();
        self.fc_weight.matvec_into(features, &mut z);
        let hidden: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        let hidden_t: Vec<T> = hidden.iter().map(|&v| T::cast(v)).collect();
        let (p, out) = self.out.forward(&hidden_t)?;
        Ok((
            p,
            AttentionHeadCache {
                features: features.to_vec(),
                hidden,
                out,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &AttentionHeadCache<T>,
        d_p: f64,
        grads: &mut AttentionHead<T>,
    ) -> Result<Vec<f64>> {
        if cache.features.len() != self.input_size() || cache.hidden.len() != self.fc_bias.rows() {
            return Err(Error::InvalidState("attention head cache mismatch".into()));
        }
        let d_hidden = self.out.backward(&cache.out, d_p, &mut grads.out)?;
        let d_z: Vec<f64> = d_hidden
            .iter()
            .zip(&cache.hidden)
            .map(|(g, y)| g * (1.0 - y * y))
            .collect();
        grads.fc_weight.add_outer(&d_z, &cache.features);
        grads.fc_bias.add_outer(&d_z, &[T::one()]);
        let mut d_features = vec![0.0; self.input_size()];
        self.fc_weight.matvec_t_into(&d_z, &mut d_features);
        Ok(d_features)
    }
}

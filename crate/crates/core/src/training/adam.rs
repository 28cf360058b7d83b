use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Parameters, Scalar};

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: BTreeMap<String, Matrix<T>>,
    second: BTreeMap<String, Matrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Matrix<T>> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Matrix<T>> {
        self.second.get(name)
    }

    /// One update of every tensor in `params` from the same-named tensor in
    /// `grads`.
    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.params();
        let mut params = params.params_mut();
        if grads.len() != params.len() {
            return Err(Error::invalid(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((pn, p), (gn, g)) in params.iter().zip(&grads) {
            if pn != gn || p.shape() != g.shape() {
                return Err(Error::invalid(format!(
                    "adam: parameter {pn} {:?} does not match gradient {gn} {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((name, p), (_, g)) in params.iter_mut().zip(&grads) {
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.rows(), p.cols()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.rows(), p.cols()));
            let (b1, b2) = (self.beta1, self.beta2);
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gi = gi.as_f64();
                let mn = b1 * mi.as_f64() + (1.0 - b1) * gi;
                let vn = b2 * vi.as_f64() + (1.0 - b2) * gi * gi;
                *mi = T::cast(mn);
                *vi = T::cast(vn);
                let update = self.learning_rate * (mn / bc1) / ((vn / bc2).sqrt() + self.epsilon);
                *pi = T::cast(pi.as_f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug)]
    struct Theta(Matrix<f64>);

    impl Parameters<f64> for Theta {
        fn params(&self) -> Vec<(String, &Matrix<f64>)> {
            vec![("theta".into(), &self.0)]
        }
        fn params_mut(&mut self) -> Vec<(String, &mut Matrix<f64>)> {
            vec![("theta".into(), &mut self.0)]
        }
        fn zeros_like(&self) -> Self {
            Theta(Matrix::zeros(self.0.rows(), self.0.cols()))
        }
    }

    fn theta(v: &[f64]) -> Theta {
        Theta(Matrix::row_vector(v))
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.3, -2.0, 1e3] {
            let mut p = theta(&[1.0]);
            let mut adam = AdamState::new(0.01);
            adam.step(&mut p, &theta(&[g])).unwrap();
            let delta = p.0.get(0, 0) - 1.0;
            let expected = -0.01 * g.abs() / (g.abs() + 1e-8) * g.signum();
            assert!((delta - expected).abs() < 1e-12, "{delta} vs {expected}");
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = theta(&[0.5, -0.25]);
        let mut adam = AdamState::new(0.1);
        for _ in 0..50 {
            adam.step(&mut p, &theta(&[0.0, 0.0])).unwrap();
        }
        assert_eq!(p.0.data(), &[0.5, -0.25]);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        let mut p = theta(&[1.0]);
        let mut adam = AdamState::new(0.1);
        for _ in 0..200 {
            let g = 2.0 * p.0.get(0, 0);
            adam.step(&mut p, &theta(&[g])).unwrap();
        }
        assert!(p.0.get(0, 0).abs() < 0.05, "theta = {}", p.0.get(0, 0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = theta(&[1.0, 2.0]);
        let mut adam = AdamState::new(0.1);
        assert!(adam.step(&mut p, &theta(&[1.0])).is_err());
        assert_eq!(adam.step_count(), 0);
    }
}

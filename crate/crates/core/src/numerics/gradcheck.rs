use crate::error::{Error, Result};

use super::{NamedTensors, Scalar};

/// Outcome of comparing one parameter tensor's analytic gradient against
/// central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Flat index of the worst entry.
    pub worst_index: usize,
}

/// Floor on the denominator of the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Checks every entry of every tensor in `params` by central differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε`.
///
/// `loss_fn` must be deterministic; it is evaluated twice at the unperturbed
/// point and any difference is reported as a precondition violation.
pub fn finite_diff_check<T, F>(
    loss_fn: F,
    params: &NamedTensors<T>,
    analytic_grads: &NamedTensors<T>,
    epsilon: f64,
    tol: f64,
) -> Result<Vec<GradCheckReport>>
where
    T: Scalar,
    F: Fn(&NamedTensors<T>) -> Result<f64>,
{
    if !(1e-5..=1e-2).contains(&epsilon) {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} outside [1e-5, 1e-2]"
        )));
    }
    let base_a = loss_fn(params)?;
    let base_b = loss_fn(params)?;
    if base_a.to_bits() != base_b.to_bits() {
        return Err(Error::PreconditionViolation(format!(
            "loss function is not deterministic ({base_a} vs {base_b})"
        )));
    }

    let mut work = params.clone();
    let mut reports = Vec::with_capacity(params.len());
    for (name, tensor) in params {
        let grad = analytic_grads
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("analytic gradient for {name}")))?;
        if grad.shape() != tensor.shape() {
            return Err(Error::invalid(format!(
                "gradient shape {:?} for {name} does not match parameter {:?}",
                grad.shape(),
                tensor.shape()
            )));
        }
        let mut max_err = 0.0f64;
        let mut worst = 0usize;
        for i in 0..tensor.len() {
            let orig = tensor.data()[i];
            let plus = T::cast(orig.as_f64() + epsilon);
            let minus = T::cast(orig.as_f64() - epsilon);
            let step = plus.as_f64() - minus.as_f64();

            set_entry(&mut work, name, i, plus);
            let lp = loss_fn(&work)?;
            set_entry(&mut work, name, i, minus);
            let lm = loss_fn(&work)?;
            set_entry(&mut work, name, i, orig);

            let numeric = (lp - lm) / step;
            let err = relative_error(grad.data()[i].as_f64(), numeric);
            if err > max_err || err.is_nan() {
                max_err = if err.is_nan() { f64::INFINITY } else { err };
                worst = i;
            }
        }
        reports.push(GradCheckReport {
            name: name.clone(),
            max_relative_error: max_err,
            tolerance: tol,
            passed: max_err <= tol,
            worst_index: worst,
        });
    }
    Ok(reports)
}

fn set_entry<T: Scalar>(set: &mut NamedTensors<T>, name: &str, i: usize, v: T) {
    if let Some(m) = set.get_mut(name) {
        m.data_mut()[i] = v;
    }
}

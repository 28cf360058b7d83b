use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Matrix, Scalar};

/// Name-ordered set of tensors.
pub type NamedTensors<T> = BTreeMap<String, Matrix<T>>;

/// A model whose trainable tensors can be enumerated by name.
///
/// Gradients are represented by a value of the same type, so `zeros_like`
/// doubles as the gradient accumulator constructor.
pub trait Parameters<T: Scalar>: Sized {
    fn params(&self) -> Vec<(String, &Matrix<T>)>;

    fn params_mut(&mut self) -> Vec<(String, &mut Matrix<T>)>;

    fn zeros_like(&self) -> Self;

    fn to_named(&self) -> NamedTensors<T> {
        self.params()
            .into_iter()
            .map(|(n, m)| (n, m.clone()))
            .collect()
    }

    /// Overwrites every tensor from `named`; names and shapes must match
    /// exactly.
    fn load_named(&mut self, named: &NamedTensors<T>) -> Result<()> {
        let mut offenders = Vec::new();
        let mut seen = 0usize;
        for (name, slot) in self.params_mut() {
            match named.get(&name) {
                Some(src) if src.shape() == slot.shape() => {
                    slot.data_mut().copy_from_slice(src.data());
                    seen += 1;
                }
                Some(src) => offenders.push(format!(
                    "{name} (shape {:?}, expected {:?})",
                    src.shape(),
                    slot.shape()
                )),
                None => offenders.push(format!("{name} (missing)")),
            }
        }
        if offenders.is_empty() && seen != named.len() {
            let known: Vec<String> = self.params().into_iter().map(|(n, _)| n).collect();
            offenders.extend(
                named
                    .keys()
                    .filter(|k| !known.contains(k))
                    .map(|k| format!("{k} (unexpected)")),
            );
        }
        if offenders.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompatibleCheckpoint { offenders })
        }
    }

    fn add_assign(&mut self, other: &Self) -> Result<()> {
        for ((name, a), (_, b)) in self.params_mut().into_iter().zip(other.params()) {
            a.add_assign(b)
                .map_err(|e| Error::invalid(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    fn scale(&mut self, factor: f64) {
        for (_, m) in self.params_mut() {
            m.scale(factor);
        }
    }

    fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, m)| m.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|(_, m)| m.is_finite())
    }
}

//! Dense kernels, activations, initialization, seeded randomness and the
//! finite-difference gradient checker.

mod gradcheck;
mod init;
mod matrix;
mod params;
mod rng;
mod scalar;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use init::init_uniform_xavier;
pub use matrix::{softmax_into, Activation, Matrix};
pub use params::{NamedTensors, Parameters};
pub use rng::RngState;
pub use scalar::{dot, sigmoid, Scalar};

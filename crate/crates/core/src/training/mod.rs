//! Losses, Adam, the three training regimes and checkpoint serialization.

mod adam;
mod checkpoint;
mod hyperparams;
mod loss;
mod regimes;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, ModelKind, FORMAT_VERSION, MAGIC};
pub use hyperparams::{Hyperparams, HYPERPARAM_KEYS};
pub use loss::{bce_loss, mean_bce, PROB_CLAMP};
pub use regimes::{
    example_rng, train_baseline, train_baseline_with, train_joint, train_joint_with, transfer_init,
    write_step_log, write_train_log, BaselineOutcome, EpochView, JointOutcome, JointStepView,
    LanguageData, Split, StepRecord, TrainLogRecord,
};

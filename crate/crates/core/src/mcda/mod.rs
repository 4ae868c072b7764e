//! The MCDA training algorithm and the method variants sharing its loop.

pub mod config;
pub mod labels;
pub mod objective;
pub mod sampling;
pub mod train;

pub use config::{grl_coeff, lr_schedule, Adversary, Method, Sampling, StepPlan, TargetSupervision, TrainConfig};
pub use labels::{entropy, mix_label, MixedLabel};
pub use objective::{
    adversarial_from_logits, adversarial_loss, classification_loss, evaluate, Batch, Detached, Evaluation, GradMode,
    Losses, ObjectiveSpec, Term,
};
pub use sampling::{balanced_source_batch, uniform_batch, ClassPools};
pub use train::{train, train_with, EpochRecord, StepRecord, TrainLog, TrainOutcome, Trainer};

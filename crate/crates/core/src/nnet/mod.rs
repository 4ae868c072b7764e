//! Differentiable building blocks: shallow extractor g1, deep extractor g2,
//! classifier h, discriminator, gradient reversal and AdaIN.
//!
//! Every layer has a hand-written backward pass; [`grad_check`] verifies
//! them against central finite differences.

mod adain;
mod checkpoint;
mod gradcheck;
mod grl;
mod layers;
mod optim;
mod params;
pub mod tensor;

pub use adain::{
    adain, adain_batch, adain_batch_backward, channel_stats, AdainCache, ChannelStats, FeatureMap, DEFAULT_EPSILON,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, grad_check_multi, BlockCheck, GradCheckOptions, GradCheckReport};
pub use grl::Grl;
pub use layers::{
    classifier_backward, classifier_forward, disc_backward, disc_forward, discriminator_forward, features_and_probs,
    forward, g1_backward, g1_forward, g2_backward, g2_forward, input_rows, DeepCache, DiscCache, ForwardOutput,
    StageCache,
};
pub use optim::Sgd;
pub use params::{block, init_model, Arch, Grads, ModelBundle, ParamBlock};

//! HC-decomposed critics built on small hand-differentiated MLPs.

mod critic;
mod features;
mod hstructure;
mod mlp;
mod mono;
mod policy;
mod snapshot;
mod variance;

pub use critic::{hc_policy_gradient, hc_td_loss, reg_loss, HcCritic, LossOutput, TdSettings};
pub use features::FeatureLayout;
pub use hstructure::{HEval, HKind, HStructure};
pub use mlp::{Adam, Mlp, MlpArch, OutputActivation, Tape};
pub use mono::{monolithic_td_loss, monolithic_trajectory_gradient, MonolithicCritic};
pub use policy::{policy_gradient, ActionCritic, DeterministicPolicy};
pub use snapshot::ParamSnapshot;
pub use variance::{estimate_gradient_variance, final_layer_gradients, summed_sample_variance, GradientVariance};

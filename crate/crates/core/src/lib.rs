//! Delayed-reward MDPs with trajectory-indexed Q-functions.
//!
//! - [`drmdp`]: model, reward functionals, policies, sampling.
//! - [`tabular`]: exact Bellman machinery over trajectory keys.
//! - [`counterexamples`]: small named MDPs with closed-form answers.
//! - [`approx`]: HC-decomposed neural critics and actor gradients.
//! - [`env`]: the Point Reach task and delayed-reward wrapper.
//! - [`experiment`]: training loop, configs, metrics and verification suites.

pub mod approx;
pub mod counterexamples;
pub mod drmdp;
pub mod env;
pub mod error;
pub mod experiment;
pub mod tabular;

pub use error::{Error, Result};

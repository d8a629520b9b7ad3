//! Training runs, replay storage, metrics and the verification suites.

mod config;
pub mod gradcheck;
mod metrics;
mod replay;
mod train;
mod verify;

pub use config::{ActorConfig, Algorithm, CriticConfig, EnvConfig, EnvKind, RunConfig, TrainConfig};
pub use metrics::{read_metrics_csv, rap, write_metrics_csv, MetricsRow, METRICS_HEADER};
pub use replay::{ReplayBuffer, ReplayRecord, SegmentStep};
pub use train::{
    ircr_baseline_train, ircr_td_loss, make_env, train, write_outcome, IrcrCritic, IrcrRedistributor, TrainOutcome,
};
pub use verify::{verify, CheckLine, Suite, VerifyReport, GRADIENT_POINTS, GRADIENT_TOL};

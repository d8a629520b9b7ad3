//! Exact tabular machinery over trajectory keys `τ_{t_i−c:t+1}`.

pub mod classical;
mod exact;
mod graph;
mod improve;
mod offpolicy;
mod solve;
mod vanilla;

pub use exact::exact_q_by_enumeration;
pub use graph::{Kernel, KeyGraph, KeyNode, Successor, DEFAULT_KEY_CAP};
pub use improve::{argmax_lowest, policy_improve, policy_iteration, Improvement, PolicyIterationResult, TIE_TOL};
pub use offpolicy::{off_policy_bias_report, BiasEntry, OffPolicyBiasReport};
pub use solve::{
    bellman_sweep, evaluate_policy, policy_value, solve_fixed_point, TrajectoryQTable, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
pub use vanilla::{
    greedy_vanilla_policy, vanilla_policy_iteration, vanilla_q_fixed_point, StateQTable, VanillaIterationResult,
};

//! Small named MDPs with known answers, each re-derived by the tabular engine on load.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::drmdp::{ActionId, DrmdpSpec, Policy, PolicyS, PolicyTau, RewardKind, StateId, Step};
use crate::error::{Error, Result};
use crate::tabular::{
    policy_iteration, policy_value, solve_fixed_point, vanilla_policy_iteration, vanilla_q_fixed_point, KeyGraph,
    DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};

/// Agreement required between an expected quantity and its recomputation.
pub const FIXTURE_TOL: f64 = 1e-9;
const ENUMERATION_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FixtureName {
    /// Two starts feeding one decision state; the interval reward is the XOR of both choices.
    XorPolicyClass,
    /// On-policy `(s, a)` regression ranks the actions at `A` the wrong way round.
    FixedPointBias,
    /// Past-invariant, yet the best policy needs the interval history at `B`.
    OptimalNotInPiS,
}

impl FixtureName {
    pub const ALL: [FixtureName; 3] = [FixtureName::XorPolicyClass, FixtureName::FixedPointBias, FixtureName::OptimalNotInPiS];

    pub fn as_str(self) -> &'static str {
        match self {
            FixtureName::XorPolicyClass => "xor-policy-class",
            FixtureName::FixedPointBias => "fixed-point-bias",
            FixtureName::OptimalNotInPiS => "optimal-not-in-pi-s",
        }
    }
}

impl fmt::Display for FixtureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        FixtureName::ALL
            .into_iter()
            .find(|f| f.as_str().replace('-', "") == norm)
            .ok_or_else(|| Error::UnknownName { kind: "fixture", name: s.into() })
    }
}

/// How an expected value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Closed-form expression in `γ`.
    ClosedForm,
    /// Hand enumeration of the fixture's few policies.
    Enumerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub value: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureCheck {
    pub quantity: String,
    pub expected: f64,
    pub computed: f64,
}

impl FixtureCheck {
    pub fn passed(&self) -> bool {
        (self.expected - self.computed).abs() <= FIXTURE_TOL
    }
}

#[derive(Debug, Clone)]
pub struct NamedFixture {
    pub name: FixtureName,
    pub spec: DrmdpSpec,
    pub expected: BTreeMap<String, Expected>,
    pub checks: Vec<FixtureCheck>,
}

fn xor_spec(gamma: f64) -> Result<DrmdpSpec> {
    DrmdpSpec::builder()
        .state("A0")
        .state("A1")
        .state("B")
        .absorbing_state("C")
        .action("A0", "a0")
        .action("A1", "a1")
        .action("B", "b0")
        .action("B", "b1")
        .transition("A0", "a0", "B", 1.0)
        .transition("A1", "a1", "B", 1.0)
        .transition("B", "b0", "C", 1.0)
        .transition("B", "b1", "C", 1.0)
        .initial("A0", 0.5)
        .initial("A1", 0.5)
        .interval(2, 1.0)
        .reward_kind(RewardKind::Tabulated)
        .tabulate("A0.a0 B.b0", 0.0)
        .tabulate("A0.a0 B.b1", 1.0)
        .tabulate("A1.a1 B.b0", 1.0)
        .tabulate("A1.a1 B.b1", 0.0)
        .gamma(gamma)
        .build()
}

fn fixed_point_bias_spec(gamma: f64) -> Result<DrmdpSpec> {
    DrmdpSpec::builder()
        .state("A")
        .state("B")
        .state("C")
        .state("D")
        .absorbing_state("C0")
        .absorbing_state("D0")
        .action("A", "a0")
        .action("A", "a1")
        .action("B", "b")
        .action("C", "c")
        .action("D", "d")
        .transition("A", "a0", "C", 1.0)
        .transition("A", "a1", "D", 1.0)
        .transition("B", "b", "D", 1.0)
        .transition("C", "c", "C0", 1.0)
        .transition("D", "d", "D0", 1.0)
        .initial("A", 0.5)
        .initial("B", 0.5)
        .interval(2, 1.0)
        .reward_kind(RewardKind::Sum)
        .step_reward("A", "a0", 0.01)
        .step_reward("A", "a1", 1.0)
        .step_reward("B", "b", -1.0)
        .gamma(gamma)
        .build()
}

fn optimal_not_in_pi_s_spec(gamma: f64) -> Result<DrmdpSpec> {
    // Action names encode the multipliers: a10 = 10, a01 = 0.1, bp = +1, bm = −1.
    DrmdpSpec::builder()
        .state("Ab")
        .state("Al")
        .state("B")
        .absorbing_state("Cp")
        .state("Cm")
        .absorbing_state("T")
        .action("Ab", "a10")
        .action("Al", "a01")
        .action("B", "bp")
        .action("B", "bm")
        .action("Cm", "t")
        .transition("Ab", "a10", "B", 1.0)
        .transition("Al", "a01", "B", 1.0)
        .transition("B", "bp", "Cp", 1.0)
        .transition("B", "bm", "Cm", 1.0)
        .transition("Cm", "t", "T", 1.0)
        .initial("Ab", 0.5)
        .initial("Al", 0.5)
        .interval(2, 1.0)
        .reward_kind(RewardKind::Tabulated)
        .tabulate("Ab.a10 B.bp", 10.0)
        .tabulate("Ab.a10 B.bm", -10.0)
        .tabulate("Al.a01 B.bp", 0.1)
        .tabulate("Al.a01 B.bm", -0.1)
        // Absorption cuts this interval after one step.
        .tabulate("Cm.t", 5.0)
        .gamma(gamma)
        .build()
}

/// Fixed-point-bias policy with `π(a1|A) = p`.
pub fn fixed_point_bias_policy(spec: &DrmdpSpec, p: f64) -> Result<PolicyS> {
    let a = spec.state_id("A")?;
    let a0 = spec.action_id("a0")?;
    let a1 = spec.action_id("a1")?;
    PolicyS::from_rows(spec, |s, _| {
        let mut row = vec![0.0; spec.num_actions()];
        if s == a {
            row[a0] = 1.0 - p;
            row[a1] = p;
        } else {
            row[spec.available(s)[0]] = 1.0;
        }
        row
    })
}

fn expected_map(name: FixtureName, gamma: f64) -> BTreeMap<String, Expected> {
    let g = gamma;
    let mut m = BTreeMap::new();
    let mut put = |k: &str, value: f64, origin| {
        m.insert(k.to_string(), Expected { value, origin });
    };
    match name {
        FixtureName::XorPolicyClass => {
            put("best J in pi_tau", g, Origin::Enumerated);
            put("best J in pi_s", 0.5 * g, Origin::Enumerated);
        }
        FixtureName::FixedPointBias => {
            put("vanilla Q(C,c)", 0.01, Origin::ClosedForm);
            put("vanilla Q(A,a0)", 0.01 * g, Origin::ClosedForm);
            put("vanilla greedy J", -0.495 * g, Origin::ClosedForm);
            put("trajectory Q(A,a1)", g, Origin::ClosedForm);
            put("trajectory policy iteration J", 0.0, Origin::ClosedForm);
            put("best J in pi_s", 0.0, Origin::ClosedForm);
        }
        FixtureName::OptimalNotInPiS => {
            put("best J in pi_s", 5.05 * g, Origin::Enumerated);
            put("best J in pi_tau", 0.5 * (10.0 * g + (0.1 * g).max(5.0 * g * g - 0.1 * g)), Origin::Enumerated);
        }
    }
    m
}

fn compute(name: FixtureName, spec: &DrmdpSpec, quantity: &str) -> Result<f64> {
    match (name, quantity) {
        (_, "best J in pi_tau") => Ok(best_in_class(spec, PolicyClass::PiTau)?.value),
        (_, "best J in pi_s") => Ok(best_in_class(spec, PolicyClass::PiS)?.value),
        (FixtureName::FixedPointBias, q) => {
            let report = reproduce_fixed_point_bias_on(spec)?;
            let row = &report.p_sweep[1];
            Ok(match q {
                "vanilla Q(C,c)" => row.q_c_c,
                "vanilla Q(A,a0)" => row.q_a_a0,
                "vanilla greedy J" => report.vanilla_final_j,
                "trajectory Q(A,a1)" => row.trajectory_q_a_a1,
                "trajectory policy iteration J" => report.new_q_final_j,
                _ => unreachable!("unknown quantity {q}"),
            })
        }
        (_, q) => unreachable!("unknown quantity {q}"),
    }
}

/// Build a fixture at discount `gamma` and recompute every expected quantity.
pub fn build_fixture(name: FixtureName, gamma: f64) -> Result<NamedFixture> {
    let spec = match name {
        FixtureName::XorPolicyClass => xor_spec(gamma)?,
        FixtureName::FixedPointBias => fixed_point_bias_spec(gamma)?,
        FixtureName::OptimalNotInPiS => optimal_not_in_pi_s_spec(gamma)?,
    };
    let expected = expected_map(name, gamma);
    let mut checks = Vec::new();
    for (quantity, exp) in &expected {
        let computed = compute(name, &spec, quantity)?;
        let check = FixtureCheck { quantity: quantity.clone(), expected: exp.value, computed };
        if !check.passed() {
            return Err(Error::FixtureMismatch {
                fixture: name.to_string(),
                quantity: quantity.clone(),
                expected: exp.value,
                computed,
            });
        }
        checks.push(check);
    }
    Ok(NamedFixture { name, spec, expected, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyClass {
    PiS,
    PiTau,
}

#[derive(Debug, Clone)]
pub enum ClassPolicy {
    S(PolicyS),
    Tau(PolicyTau),
}

impl ClassPolicy {
    pub fn as_policy(&self) -> &dyn Policy {
        match self {
            ClassPolicy::S(p) => p,
            ClassPolicy::Tau(p) => p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassOptimum {
    pub policy: ClassPolicy,
    pub value: f64,
    pub policies_evaluated: usize,
}

/// Odometer over mixed radices; returns false after the last combination.
fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radices) {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

/// Best deterministic policy of a class by exhaustive enumeration and exact evaluation.
/// Only decision points reachable in the key graph are enumerated.
pub fn best_in_class(spec: &DrmdpSpec, class: PolicyClass) -> Result<ClassOptimum> {
    let graph: Arc<KeyGraph> = KeyGraph::build(spec)?;
    // Decision points: (history, state) for Π_τ, (state, phase) for Π_s.
    let mut tau_points: BTreeSet<(Vec<Step>, StateId)> = BTreeSet::new();
    let mut s_points: BTreeSet<(StateId, usize)> = BTreeSet::new();
    for (i, key) in graph.keys().iter().enumerate() {
        let node = graph.node(i);
        tau_points.insert((key[..key.len() - 1].to_vec(), node.state));
        s_points.insert((node.state, node.phase));
    }
    let radices: Vec<usize> = match class {
        PolicyClass::PiS => s_points.iter().map(|&(s, _)| spec.available(s).len()).collect(),
        PolicyClass::PiTau => tau_points.iter().map(|(_, s)| spec.available(*s).len()).collect(),
    };
    let total = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
    if total.is_none_or(|t| t > ENUMERATION_CAP) {
        return Err(Error::EnumerationCap { cap: ENUMERATION_CAP, what: "enumerating deterministic policies" });
    }
    let mut digits = vec![0usize; radices.len()];
    let mut best: Option<ClassOptimum> = None;
    let mut evaluated = 0;
    loop {
        let policy = match class {
            PolicyClass::PiS => {
                let choice: BTreeMap<(StateId, usize), ActionId> = s_points
                    .iter()
                    .zip(&digits)
                    .map(|(&(s, ph), &d)| ((s, ph), spec.available(s)[d]))
                    .collect();
                ClassPolicy::S(PolicyS::deterministic(spec, |s, ph| {
                    choice.get(&(s, ph)).copied().unwrap_or(spec.available(s)[0])
                })?)
            }
            PolicyClass::PiTau => {
                let mut p = PolicyTau::new(spec);
                for ((h, s), &d) in tau_points.iter().zip(&digits) {
                    p.set_action(spec, h.clone(), *s, spec.available(*s)[d])?;
                }
                ClassPolicy::Tau(p)
            }
        };
        let q = solve_fixed_point(&graph, policy.as_policy(), DEFAULT_TOL * 1e-2, DEFAULT_MAX_SWEEPS)?;
        let value = policy_value(&q, policy.as_policy())?;
        evaluated += 1;
        if best.as_ref().is_none_or(|b| value > b.value + 1e-12) {
            best = Some(ClassOptimum { policy, value, policies_evaluated: 0 });
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }
    let mut best = best.expect("at least one policy");
    best.policies_evaluated = evaluated;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PSweepRow {
    pub p: f64,
    pub q_c_c: f64,
    pub q_a_a0: f64,
    pub q_d_d: f64,
    pub q_a_a1: f64,
    pub trajectory_q_a_a1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanillaRun {
    pub init_p: f64,
    pub final_p: f64,
    pub final_j: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointBiasReport {
    pub gamma: f64,
    /// Final `J` of vanilla greedy iteration started from `p = 1`.
    pub vanilla_final_j: f64,
    pub vanilla_runs: Vec<VanillaRun>,
    /// Final `J` of trajectory policy iteration started from `p = 0`.
    pub new_q_final_j: f64,
    pub new_q_final_p: f64,
    /// Vanilla fixed point under on-policy data for `p ∈ {0, 0.5, 1}`.
    pub p_sweep: Vec<PSweepRow>,
}

/// Run both iterations on the fixed-point-bias fixture at discount `gamma`.
pub fn reproduce_fixed_point_bias(gamma: f64) -> Result<FixedPointBiasReport> {
    reproduce_fixed_point_bias_on(&fixed_point_bias_spec(gamma)?)
}

fn reproduce_fixed_point_bias_on(spec: &DrmdpSpec) -> Result<FixedPointBiasReport> {
    let id = |s: &str, a: &str| -> Result<(StateId, ActionId)> { Ok((spec.state_id(s)?, spec.action_id(a)?)) };
    let (sa, a0) = id("A", "a0")?;
    let (_, a1) = id("A", "a1")?;
    let (sc, c) = id("C", "c")?;
    let (sd, d) = id("D", "d")?;
    let graph = KeyGraph::build(spec)?;
    let key_a_a1 = vec![Step::new(sa, a1)];
    let mut p_sweep = Vec::new();
    for p in [0.0, 0.5, 1.0] {
        let pi = fixed_point_bias_policy(spec, p)?;
        let q = vanilla_q_fixed_point(spec, &[(1.0, pi.clone())], DEFAULT_TOL * 1e-2)?;
        let get = |s, a| q.get(s, a).ok_or_else(|| Error::InvalidInput("pair unreachable".into()));
        let truth = solve_fixed_point(&graph, &pi, DEFAULT_TOL * 1e-2, DEFAULT_MAX_SWEEPS)?;
        p_sweep.push(PSweepRow {
            p,
            q_c_c: get(sc, c)?,
            q_a_a0: get(sa, a0)?,
            q_d_d: get(sd, d)?,
            q_a_a1: get(sa, a1)?,
            trajectory_q_a_a1: truth.get(&key_a_a1).expect("root key"),
        });
    }
    let mut vanilla_runs = Vec::new();
    for init_p in [1.0, 0.5, 0.0] {
        let run = vanilla_policy_iteration(spec, &fixed_point_bias_policy(spec, init_p)?, 20)?;
        vanilla_runs.push(VanillaRun {
            init_p,
            final_p: run.policies.last().unwrap().prob(sa, 0, a1),
            final_j: *run.returns.last().unwrap(),
            converged: run.converged,
        });
    }
    let pi = policy_iteration(spec, &fixed_point_bias_policy(spec, 0.0)?, 20)?;
    Ok(FixedPointBiasReport {
        gamma: spec.gamma(),
        vanilla_final_j: vanilla_runs[0].final_j,
        vanilla_runs,
        new_q_final_j: pi.final_return(),
        new_q_final_p: pi.final_policy().prob(sa, 0, a1),
        p_sweep,
    })
}

/// Single-interval construction where pooled data from two behaviors biases the last-step
/// values. Returns the spec with behaviors that differ before the last step and a pair that
/// differs only at the last step.
pub fn off_policy_bias_example() -> Result<(DrmdpSpec, Vec<PolicyS>, Vec<PolicyS>)> {
    let spec = DrmdpSpec::builder()
        .state("S0")
        .state("S1")
        .absorbing_state("T")
        .action("S0", "u0")
        .action("S0", "u1")
        .action("S1", "x")
        .action("S1", "y")
        .transition("S0", "u0", "S1", 1.0)
        .transition("S0", "u1", "S1", 1.0)
        .transition("S1", "x", "T", 1.0)
        .transition("S1", "y", "T", 1.0)
        .initial("S0", 1.0)
        .interval(2, 1.0)
        .reward_kind(RewardKind::Sum)
        .step_reward("S0", "u1", 1.0)
        .gamma(0.9)
        .build()?;
    let s0 = spec.state_id("S0")?;
    let behavior = |first: &str, px: f64| -> Result<PolicyS> {
        let u = spec.action_id(first)?;
        let (x, y) = (spec.action_id("x")?, spec.action_id("y")?);
        PolicyS::from_rows(&spec, |s, _| {
            let mut row = vec![0.0; spec.num_actions()];
            if s == s0 {
                row[u] = 1.0;
            } else {
                row[x] = px;
                row[y] = 1.0 - px;
            }
            row
        })
    };
    let differing = vec![behavior("u0", 0.9)?, behavior("u1", 0.1)?];
    let last_step_only = vec![behavior("u1", 0.9)?, behavior("u1", 0.1)?];
    Ok((spec, differing, last_step_only))
}

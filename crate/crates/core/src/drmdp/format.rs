//! TOML representation of a [`DrmdpSpec`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::reward::{RewardFunctional, RewardKind};
use super::spec::DrmdpSpec;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    gamma: f64,
    #[serde(default)]
    overlap: usize,
    states: Vec<String>,
    #[serde(default)]
    absorbing: Vec<String>,
    actions: Vec<String>,
    available: BTreeMap<String, Vec<String>>,
    initial: Vec<InitialEntry>,
    interval: Vec<IntervalEntry>,
    #[serde(default)]
    transition: Vec<TransitionEntry>,
    reward: RewardSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialEntry {
    state: String,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalEntry {
    n: usize,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: String,
    action: String,
    to: String,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardSection {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    step: Vec<StepReward>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    table: Vec<TableEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepReward {
    state: String,
    action: String,
    r: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    segment: String,
    value: f64,
}

/// Serialize to TOML. Floats are written in shortest round-trip form.
pub fn spec_to_text(spec: &DrmdpSpec) -> String {
    let ns = spec.num_states();
    let states: Vec<String> = spec.state_names().to_vec();
    let absorbing = (0..ns).filter(|&s| spec.is_absorbing(s)).map(|s| states[s].clone()).collect();
    let mut available = BTreeMap::new();
    let mut transition = Vec::new();
    let mut step = Vec::new();
    for s in 0..ns {
        if spec.is_absorbing(s) {
            continue;
        }
        available.insert(
            states[s].clone(),
            spec.available(s).iter().map(|&a| spec.action_name(a).to_string()).collect(),
        );
        for &a in spec.available(s) {
            for &(t, p) in spec.transition(s, a) {
                transition.push(TransitionEntry {
                    from: states[s].clone(),
                    action: spec.action_name(a).into(),
                    to: states[t].clone(),
                    p,
                });
            }
            if let Some(table) = spec.reward().per_step() {
                let r = table.get(s, a);
                if r != 0.0 {
                    step.push(StepReward { state: states[s].clone(), action: spec.action_name(a).into(), r });
                }
            }
        }
    }
    let (weights, table) = match spec.reward() {
        RewardFunctional::WeightedSum { weights, .. } => (weights.clone(), Vec::new()),
        RewardFunctional::Tabulated { table } => (
            Vec::new(),
            table
                .iter()
                .map(|(k, &value)| TableEntry { segment: spec.format_segment(k), value })
                .collect(),
        ),
        _ => (Vec::new(), Vec::new()),
    };
    let law = spec.interval_law();
    let file = SpecFile {
        gamma: spec.gamma(),
        overlap: spec.overlap(),
        states,
        absorbing,
        actions: spec.action_names().to_vec(),
        available,
        initial: (0..ns)
            .filter(|&s| spec.initial()[s] > 0.0)
            .map(|s| InitialEntry { state: spec.state_name(s).into(), p: spec.initial()[s] })
            .collect(),
        interval: law
            .support()
            .iter()
            .zip(law.probs())
            .map(|(&n, &p)| IntervalEntry { n, p })
            .collect(),
        transition,
        reward: RewardSection { kind: spec.reward().kind().name().into(), weights, step, table },
    };
    toml::to_string(&file).expect("spec file serializes")
}

pub fn spec_from_text(text: &str) -> Result<DrmdpSpec> {
    let file: SpecFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut b = DrmdpSpec::builder();
    for s in &file.states {
        if file.absorbing.contains(s) {
            b = b.absorbing_state(s);
        } else {
            b = b.state(s);
        }
    }
    // Register actions in file order so ids survive a round trip.
    b = b.declare_actions(&file.actions);
    for (s, acts) in &file.available {
        if !file.states.contains(s) {
            return Err(Error::UnknownName { kind: "state", name: s.clone() });
        }
        for a in acts {
            if !file.actions.contains(a) {
                return Err(Error::UnknownName { kind: "action", name: a.clone() });
            }
            b = b.action(s, a);
        }
    }
    for t in &file.transition {
        b = b.transition(&t.from, &t.action, &t.to, t.p);
    }
    for e in &file.initial {
        b = b.initial(&e.state, e.p);
    }
    for e in &file.interval {
        b = b.interval(e.n, e.p);
    }
    let kind: RewardKind = file.reward.kind.parse()?;
    b = b.reward_kind(kind).weights(file.reward.weights).overlap(file.overlap).gamma(file.gamma);
    for r in &file.reward.step {
        b = b.step_reward(&r.state, &r.action, r.r);
    }
    for e in &file.reward.table {
        b = b.tabulate(&e.segment, e.value);
    }
    b.build()
}

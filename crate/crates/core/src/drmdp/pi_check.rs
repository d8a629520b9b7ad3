use std::collections::BTreeMap;

use super::feasible::feasible_segments;
use super::spec::DrmdpSpec;
use super::{Step, TrajectorySegment};
use crate::error::{Error, Result};

const KEY_CAP: usize = 2_000_000;
const QUADRUPLE_CAP: usize = 200_000_000;
const TIE_TOL: f64 = 1e-12;
const STRONG_TOL: f64 = 1e-9;

/// Two heads and two tails of equal lengths whose four concatenations violate the condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PiWitness {
    pub head1: Vec<Step>,
    pub head2: Vec<Step>,
    pub tail1: Vec<Step>,
    pub tail2: Vec<Step>,
    /// `r(head1∘tail1), r(head1∘tail2), r(head2∘tail1), r(head2∘tail2)`.
    pub rewards: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiReport {
    pub holds: bool,
    pub witness: Option<PiWitness>,
    pub quadruples_checked: usize,
}

fn sign(x: f64) -> i8 {
    if x > TIE_TOL {
        1
    } else if x < -TIE_TOL {
        -1
    } else {
        0
    }
}

/// Whether the ordering of tails never depends on the head they follow, over all feasible
/// segments with bodies of at most `max_len` steps. Splits fall inside the body so the
/// head always contains the overlap prefix.
pub fn check_pi_condition(spec: &DrmdpSpec, max_len: usize) -> Result<PiReport> {
    check(spec, max_len, |[r11, r12, r21, r22]| sign(r11 - r12) == sign(r21 - r22))
}

/// Whether reward differences between tails never depend on the head (additive separability).
pub fn check_strong_pi_condition(spec: &DrmdpSpec, max_len: usize) -> Result<PiReport> {
    check(spec, max_len, |[r11, r12, r21, r22]| ((r11 - r12) - (r21 - r22)).abs() <= STRONG_TOL)
}

type Group = BTreeMap<Vec<Step>, BTreeMap<Vec<Step>, f64>>;

fn check(spec: &DrmdpSpec, max_len: usize, ok: impl Fn([f64; 4]) -> bool) -> Result<PiReport> {
    let c = spec.overlap();
    let found = feasible_segments(spec, max_len.min(spec.interval_law().max_len()), KEY_CAP)?;
    let mut groups: BTreeMap<(usize, usize), Group> = BTreeMap::new();
    for (steps, closure) in &found.completed {
        let seg = TrajectorySegment::new(steps.clone(), c);
        let reward = if closure.by_hazard {
            spec.evaluate_reward(&seg)?
        } else {
            match spec.evaluate_truncated(&seg)? {
                Some(r) => r,
                None => continue,
            }
        };
        for k in c + 1..steps.len() {
            groups
                .entry((steps.len(), k))
                .or_default()
                .entry(steps[..k].to_vec())
                .or_default()
                .insert(steps[k..].to_vec(), reward);
        }
    }
    let mut checked = 0usize;
    for group in groups.values() {
        let heads: Vec<_> = group.iter().collect();
        for (i, (h1, m1)) in heads.iter().enumerate() {
            for (h2, m2) in &heads[i + 1..] {
                let common: Vec<(&Vec<Step>, f64, f64)> = m1
                    .iter()
                    .filter_map(|(t, &r1)| m2.get(t).map(|&r2| (t, r1, r2)))
                    .collect();
                for (x, &(t1, r11, r21)) in common.iter().enumerate() {
                    for &(t2, r12, r22) in &common[x + 1..] {
                        checked += 1;
                        if checked > QUADRUPLE_CAP {
                            return Err(Error::EnumerationCap { cap: QUADRUPLE_CAP, what: "checking quadruples" });
                        }
                        let rewards = [r11, r12, r21, r22];
                        if !ok(rewards) {
                            return Ok(PiReport {
                                holds: false,
                                witness: Some(PiWitness {
                                    head1: (*h1).clone(),
                                    head2: (*h2).clone(),
                                    tail1: t1.clone(),
                                    tail2: t2.clone(),
                                    rewards,
                                }),
                                quadruples_checked: checked,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(PiReport { holds: true, witness: None, quadruples_checked: checked })
}

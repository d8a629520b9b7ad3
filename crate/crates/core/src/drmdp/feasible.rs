use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::spec::DrmdpSpec;
use super::{StateId, Step};
use crate::error::{Error, Result};

/// How an interval can close at a given segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Closure {
    /// The interval law can end the interval here.
    pub by_hazard: bool,
    /// Some successor is absorbing.
    pub by_absorption: bool,
}

/// Every reachable `𝒬` key and every segment at which an interval can close.
#[derive(Debug, Clone, Default)]
pub struct FeasibleSegments {
    /// Overlap prefix plus a nonempty body ending in `(s, a)`.
    pub keys: BTreeSet<Vec<Step>>,
    pub completed: BTreeMap<Vec<Step>, Closure>,
}

/// Enumerate reachable segments with bodies of at most `max_body` steps, starting from the
/// padded prefix at every initial state. Fails once more than `cap` keys are found.
pub fn feasible_segments(spec: &DrmdpSpec, max_body: usize, cap: usize) -> Result<FeasibleSegments> {
    let mut out = FeasibleSegments::default();
    let mut seen: HashSet<(Vec<Step>, StateId)> = HashSet::new();
    let mut work: Vec<(Vec<Step>, StateId)> = Vec::new();
    for (s, &p) in spec.initial().iter().enumerate() {
        if p > 0.0 {
            let item = (spec.start_prefix(), s);
            if seen.insert(item.clone()) {
                work.push(item);
            }
        }
    }
    while let Some((prefix, s)) = work.pop() {
        let mut seg = prefix;
        let mut restarts = Vec::new();
        extend(spec, &mut seg, s, max_body, cap, &mut out, &mut restarts)?;
        for item in restarts {
            if seen.insert(item.clone()) {
                work.push(item);
            }
        }
    }
    Ok(out)
}

fn extend(
    spec: &DrmdpSpec,
    seg: &mut Vec<Step>,
    s: StateId,
    max_body: usize,
    cap: usize,
    out: &mut FeasibleSegments,
    restarts: &mut Vec<(Vec<Step>, StateId)>,
) -> Result<()> {
    let c = spec.overlap();
    for &a in spec.available(s) {
        seg.push(Step::new(s, a));
        let k = seg.len() - c;
        if out.keys.insert(seg.clone()) && out.keys.len() > cap {
            return Err(Error::EnumerationCap { cap, what: "enumerating feasible segments" });
        }
        let h = spec.interval_law().hazard(k);
        let succ = spec.transition(s, a);
        let closure = Closure {
            by_hazard: h > 0.0,
            by_absorption: succ.iter().any(|&(t, p)| p > 0.0 && spec.is_absorbing(t)),
        };
        if closure.by_hazard || closure.by_absorption {
            out.completed.insert(seg.clone(), closure);
        }
        for &(t, p) in succ {
            if p <= 0.0 || spec.is_absorbing(t) {
                continue;
            }
            if h > 0.0 {
                restarts.push((seg[seg.len() - c..].to_vec(), t));
            }
            if h < 1.0 && k < max_body {
                extend(spec, seg, t, max_body, cap, out, restarts)?;
            }
        }
        seg.pop();
    }
    Ok(())
}

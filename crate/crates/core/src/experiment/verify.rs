//! Self-checks runnable from the command line. Failures are report content, not errors.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{numeric_gradient, relative_error, synthetic_records};
use super::replay::{ReplayRecord, SegmentStep};
use crate::approx::{
    hc_policy_gradient, hc_td_loss, monolithic_td_loss, monolithic_trajectory_gradient, reg_loss, ActionCritic,
    DeterministicPolicy, FeatureLayout, HKind, HStructure, HcCritic, Mlp, MlpArch, MonolithicCritic, OutputActivation,
    TdSettings,
};
use crate::counterexamples::{
    best_in_class, build_fixture, off_policy_bias_example, reproduce_fixed_point_bias, FixtureName, PolicyClass,
};
use crate::drmdp::random::{random_spec, RandomReward, RandomSpecConfig};
use crate::drmdp::{check_pi_condition, DrmdpSpec, PolicyS};
use crate::error::{Error, Result};
use crate::tabular::{
    bellman_sweep, exact_q_by_enumeration, off_policy_bias_report, policy_iteration, solve_fixed_point, KeyGraph,
    TrajectoryQTable, DEFAULT_MAX_SWEEPS,
};

pub const GRADIENT_POINTS: usize = 100;
pub const GRADIENT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Theory,
    Counterexamples,
    Gradients,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Self::Theory),
            "counterexamples" => Ok(Self::Counterexamples),
            "gradients" => Ok(Self::Gradients),
            "all" => Ok(Self::All),
            _ => Err(Error::UnknownName { kind: "suite", name: s.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| !l.passed)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for line in &self.lines {
            writeln!(w, "{line}")?;
        }
        let failed = self.failures().count();
        writeln!(w, "{} checks, {} failed", self.lines.len(), failed)
    }

    fn push(&mut self, suite: &'static str, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.lines.push(CheckLine { suite, name: name.into(), passed, detail: detail.into() });
    }

    /// Records `expected` vs `computed` at absolute tolerance `tol`.
    fn close(&mut self, suite: &'static str, name: impl Into<String>, computed: f64, expected: f64, tol: f64) {
        let ok = (computed - expected).abs() <= tol;
        self.push(suite, name, ok, format!("computed {computed:.12} expected {expected:.12}"));
    }

    fn outcome(&mut self, suite: &'static str, name: &str, result: Result<()>) {
        if let Err(e) = result {
            self.push(suite, name, false, format!("error: {e}"));
        }
    }
}

pub fn verify(suite: Suite) -> VerifyReport {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Theory | Suite::All) {
        let r = theory(&mut report);
        report.outcome("theory", "suite", r);
    }
    if matches!(suite, Suite::Counterexamples | Suite::All) {
        let r = counterexamples(&mut report);
        report.outcome("counterexamples", "suite", r);
    }
    if matches!(suite, Suite::Gradients | Suite::All) {
        let r = gradients(&mut report);
        report.outcome("gradients", "suite", r);
    }
    report
}

fn random_policy(spec: &DrmdpSpec, rng: &mut ChaCha8Rng) -> Result<PolicyS> {
    let cell = std::cell::RefCell::new(rng);
    PolicyS::from_rows(spec, |s, _| {
        let avail = spec.available(s);
        let mut row = vec![0.0; spec.num_actions()];
        let raw: Vec<f64> = avail.iter().map(|_| cell.borrow_mut().random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&a, w) in avail.iter().zip(&raw) {
            row[a] = w / total;
        }
        let head: f64 = avail[..avail.len() - 1].iter().map(|&a| row[a]).sum();
        row[avail[avail.len() - 1]] = 1.0 - head;
        row
    })
}

fn theory(report: &mut VerifyReport) -> Result<()> {
    const S: &str = "theory";
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E0);
    let (mut worst_ratio, mut worst_gap): (f64, f64) = (0.0, 0.0);
    let mut contraction_ok = true;
    for i in 0..12 {
        let cfg = RandomSpecConfig { layered: i % 2 == 0, size: 3, overlap: i % 3, ..Default::default() };
        let spec = random_spec(&mut rng, &cfg);
        let pi = random_policy(&spec, &mut rng)?;
        let graph = KeyGraph::build(&spec)?;
        let fixed = solve_fixed_point(&graph, &pi, 1e-12, DEFAULT_MAX_SWEEPS)?;
        if cfg.layered {
            let oracle = exact_q_by_enumeration(&spec, &pi, 64)?;
            worst_gap = worst_gap.max(fixed.sup_distance(&oracle)?);
        }
        let mut cur = TrajectoryQTable::zeros(&graph);
        let mut prev = cur.sup_distance(&fixed)?;
        for _ in 0..10 {
            cur = bellman_sweep(&cur, &cur, &pi)?;
            let d = cur.sup_distance(&fixed)?;
            if prev > 1e-9 {
                worst_ratio = worst_ratio.max(d / prev / spec.gamma());
                contraction_ok &= d <= spec.gamma() * prev + 1e-9;
            }
            prev = d;
        }
    }
    report.push(S, "sweep contracts by gamma", contraction_ok, format!("worst ratio/gamma {worst_ratio:.6}"));
    report.push(S, "fixed point matches enumeration", worst_gap < 1e-8, format!("sup gap {worst_gap:.3e}"));

    let mut violations = 0;
    let mut checked = 0;
    for i in 0..20 {
        let reward = if i % 2 == 0 { RandomReward::Sum } else { RandomReward::MonotoneMax };
        let overlap = if reward == RandomReward::Sum { i % 3 } else { 0 };
        let spec = random_spec(&mut rng, &RandomSpecConfig { reward, overlap, ..Default::default() });
        let r = check_pi_condition(&spec, spec.interval_law().max_len())?;
        violations += usize::from(!r.holds);
        checked += r.quadruples_checked;
    }
    report.push(S, "order invariance on sum and max specs", violations == 0, format!("{violations} violating specs, {checked} quadruples"));

    let mut monotone = true;
    let mut dominated = true;
    let mut converged = true;
    for _ in 0..10 {
        let spec = random_spec(&mut rng, &RandomSpecConfig::default());
        let run = policy_iteration(&spec, &PolicyS::uniform(&spec), 20)?;
        converged &= run.converged;
        monotone &= run.returns.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        dominated &= run.tables.windows(2).all(|w| w[0].values().iter().zip(w[1].values()).all(|(a, b)| *b >= a - 1e-9));
    }
    report.push(S, "policy iteration improves J", monotone, "J non-decreasing across rounds");
    report.push(S, "policy iteration dominates pointwise", dominated, "Q non-decreasing on every key");
    report.push(S, "policy iteration terminates", converged, "repeated policy within 20 rounds");
    Ok(())
}

fn counterexamples(report: &mut VerifyReport) -> Result<()> {
    const S: &str = "counterexamples";
    for gamma in [0.5, 0.9, 0.99] {
        for name in FixtureName::ALL {
            let f = build_fixture(name, gamma)?;
            for c in &f.checks {
                report.close(S, format!("{name} gamma={gamma} {}", c.quantity), c.computed, c.expected, 1e-9);
            }
        }
        let r = reproduce_fixed_point_bias(gamma)?;
        for row in &r.p_sweep {
            let p = row.p;
            report.close(S, format!("fixed-point-bias gamma={gamma} p={p} vanilla Q(C,c)"), row.q_c_c, 0.01, 1e-9);
            report.close(S, format!("fixed-point-bias gamma={gamma} p={p} vanilla Q(A,a0)"), row.q_a_a0, 0.01 * gamma, 1e-9);
            report.close(S, format!("fixed-point-bias gamma={gamma} p={p} vanilla Q(D,d)"), row.q_d_d, (p - 1.0) / (p + 1.0), 1e-9);
            report.close(
                S,
                format!("fixed-point-bias gamma={gamma} p={p} vanilla Q(A,a1)"),
                row.q_a_a1,
                gamma * (p - 1.0) / (p + 1.0),
                1e-9,
            );
        }
        report.close(S, format!("fixed-point-bias gamma={gamma} vanilla greedy J"), r.vanilla_final_j, -0.495 * gamma, 1e-9);
        report.close(S, format!("fixed-point-bias gamma={gamma} trajectory policy iteration J"), r.new_q_final_j, 0.0, 1e-9);
    }
    let xor = build_fixture(FixtureName::XorPolicyClass, 0.9)?;
    let pi = check_pi_condition(&xor.spec, 2)?;
    report.push(
        S,
        "xor-policy-class violates PI",
        !pi.holds,
        pi.witness.map_or("no witness".into(), |w| {
            format!(
                "{} vs {} after {} / {}",
                xor.spec.format_segment(&w.head1),
                xor.spec.format_segment(&w.head2),
                xor.spec.format_segment(&w.tail1),
                xor.spec.format_segment(&w.tail2)
            )
        }),
    );
    let tau = best_in_class(&xor.spec, PolicyClass::PiTau)?.value;
    let s = best_in_class(&xor.spec, PolicyClass::PiS)?.value;
    report.close(S, "xor-policy-class gamma=0.9 class gap pi_tau / pi_s", tau / s, 2.0, 1e-12);

    let (spec, differing, last_only) = off_policy_bias_example()?;
    let varying = off_policy_bias_report(&spec, &differing)?;
    report.push(S, "off-policy bias varies across last actions", varying.varies(), format!("spread {:.12}", varying.max_spread));
    let same = off_policy_bias_report(&spec, &[differing[0].clone(), differing[0].clone()])?;
    report.push(S, "off-policy bias constant for identical behaviors", !same.varies(), format!("spread {:.3e}", same.max_spread));
    let last = off_policy_bias_report(&spec, &last_only)?;
    report.push(S, "off-policy bias constant when behaviors differ only at the last step", !last.varies(), format!("spread {:.3e}", last.max_spread));
    Ok(())
}

struct GradStat {
    worst: f64,
}

impl GradStat {
    fn new() -> Self {
        Self { worst: 0.0 }
    }

    fn add(&mut self, analytic: &[f64], numeric: &[f64]) {
        self.worst = self.worst.max(relative_error(analytic, numeric));
    }

    fn report(&self, report: &mut VerifyReport, name: &str) {
        report.push(
            "gradients",
            name,
            self.worst < GRADIENT_TOL,
            format!("{GRADIENT_POINTS} points, worst relative error {:.3e}", self.worst),
        );
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn gradients(report: &mut VerifyReport) -> Result<()> {
    const S: &str = "gradients";
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AD);
    let layout = FeatureLayout::new(2, 2, 4);
    let hidden = [12, 12];
    let overlap = 1;
    let settings = TdSettings { gamma: 0.9, overlap };

    let (mut gp, mut gx, mut gt) = (GradStat::new(), GradStat::new(), GradStat::new());
    for _ in 0..GRADIENT_POINTS {
        let net = Mlp::new(MlpArch::scalar(5, &hidden), &mut rng);
        let x = random_vec(&mut rng, 5, -1.0, 1.0);
        let (dp, dx) = net.gradient(&x);
        let arch = net.arch().clone();
        gp.add(&dp, &numeric_gradient(|p| Mlp::from_params(arch.clone(), p.to_vec()).unwrap().value(&x), net.params()));
        gx.add(&dx, &numeric_gradient(|z| net.value(z), &x));

        let tnet = Mlp::new(MlpArch::new(3, &hidden, 2, OutputActivation::Tanh), &mut rng);
        let x = random_vec(&mut rng, 3, -1.0, 1.0);
        let w = random_vec(&mut rng, 2, -1.0, 1.0);
        let tape = tnet.forward_tape(ndarray::ArrayView2::from_shape((1, 3), &x).unwrap());
        let mut g = vec![0.0; tnet.num_params()];
        tnet.backward(&tape, ndarray::ArrayView2::from_shape((1, 2), &w).unwrap(), &mut g);
        let tarch = tnet.arch().clone();
        gt.add(
            &g,
            &numeric_gradient(
                |p| {
                    let y = Mlp::from_params(tarch.clone(), p.to_vec()).unwrap().forward(&x);
                    y[0] * w[0] + y[1] * w[1]
                },
                tnet.params(),
            ),
        );
    }
    gp.report(report, "mlp parameters");
    gx.report(report, "mlp inputs");
    gt.report(report, "tanh-output mlp parameters");

    for kind in [HKind::Singleton, HKind::PairwiseK(1), HKind::PairwiseK(3)] {
        let mut stat = GradStat::new();
        for _ in 0..GRADIENT_POINTS {
            let h = HStructure::new(kind, layout, &hidden, &mut rng);
            let rec = &synthetic_records(&mut rng, layout, overlap, 1)[0];
            let eval = h.forward_batch(&[rec.segment.as_slice()]);
            let mut g = vec![0.0; h.num_params()];
            h.backward_batch(&eval, &[1.0], &mut g);
            let mut probe = h.clone();
            let num = numeric_gradient(
                |p| {
                    probe.set_flat_params(p);
                    probe.value(&rec.segment)
                },
                &h.flat_params(),
            );
            stat.add(&g, &num);
        }
        stat.report(report, &format!("H {}", kind.name()));
    }

    let (mut td, mut reg, mut pg, mut mtd, mut mpg) =
        (GradStat::new(), GradStat::new(), GradStat::new(), GradStat::new(), GradStat::new());
    let mut exact_identity = true;
    let mut worst_action = 0.0f64;
    for _ in 0..GRADIENT_POINTS {
        let critic = HcCritic::new(HKind::PairwiseK(1), layout, &hidden, 0.5, &mut rng);
        let policy = DeterministicPolicy::new(layout, &hidden, &mut rng);
        let records = synthetic_records(&mut rng, layout, overlap, 6);
        let batch: Vec<&ReplayRecord> = records.iter().collect();

        let out = hc_td_loss(&critic, &batch, &policy, settings)?;
        let mut probe = critic.clone();
        td.add(
            &out.grad,
            &numeric_gradient(
                |p| {
                    probe.set_flat_params(p);
                    hc_td_loss(&probe, &batch, &policy, settings).unwrap().loss
                },
                &critic.flat_params(),
            ),
        );

        let intervals: Vec<(&[SegmentStep], f64)> =
            records.iter().map(|r| (r.segment.as_slice(), r.reward + 1.0)).collect();
        let (_, g) = reg_loss(&critic.h, &intervals);
        let mut h = critic.h.clone();
        reg.add(
            &g,
            &numeric_gradient(
                |p| {
                    h.set_flat_params(p);
                    reg_loss(&h, &intervals).0
                },
                &critic.h.flat_params(),
            ),
        );

        let g = hc_policy_gradient(&critic, &batch, &policy)?;
        let mut pol = policy.clone();
        pg.add(
            &g,
            &numeric_gradient(
                |p| {
                    pol.net_mut().params_mut().copy_from_slice(p);
                    batch
                        .iter()
                        .map(|r| {
                            let a = pol.act(&r.current().obs, r.current().phase);
                            let mut seg = r.segment.clone();
                            seg.last_mut().unwrap().action = a;
                            critic.value(&seg)
                        })
                        .sum::<f64>()
                        / batch.len() as f64
                },
                policy.net().params(),
            ),
        );

        let mono = MonolithicCritic::new(layout, layout.max_phase + overlap, &hidden, &mut rng);
        let out = monolithic_td_loss(&mono, &batch, &policy, settings)?;
        let mut mp = mono.clone();
        mtd.add(
            &out.grad,
            &numeric_gradient(
                |p| {
                    mp.net.params_mut().copy_from_slice(p);
                    monolithic_td_loss(&mp, &batch, &policy, settings).unwrap().loss
                },
                mono.net.params(),
            ),
        );
        let g = monolithic_trajectory_gradient(&mono, &batch, &policy)?;
        let mut pol = policy.clone();
        mpg.add(
            &g,
            &numeric_gradient(
                |p| {
                    pol.net_mut().params_mut().copy_from_slice(p);
                    batch
                        .iter()
                        .map(|r| {
                            let mut seg = r.segment.clone();
                            seg.last_mut().unwrap().action = pol.act(&r.current().obs, r.current().phase);
                            mono.value(&seg).unwrap()
                        })
                        .sum::<f64>()
                        / batch.len() as f64
                },
                policy.net().params(),
            ),
        );

        // ∇_a of H + C against ∇_a C: H never sees the last action.
        let rec = batch[0];
        let a = rec.current().action.clone();
        let grad_c = critic.action_gradients(&[rec], ndarray::ArrayView2::from_shape((1, a.len()), &a).unwrap())?;
        let num = numeric_gradient(
            |z| {
                let mut seg = rec.segment.clone();
                seg.last_mut().unwrap().action = z.to_vec();
                critic.value(&seg)
            },
            &a,
        );
        worst_action = worst_action.max(relative_error(grad_c.as_slice().unwrap(), &num));
        let mut moved = rec.segment.clone();
        moved.last_mut().unwrap().action = a.iter().map(|x| x + 0.5).collect();
        exact_identity &= critic.h.value(rec.history()).to_bits() == critic.h.value(&moved[..moved.len() - 1]).to_bits();
    }
    td.report(report, "HC TD loss with regularizer");
    reg.report(report, "regularizer");
    pg.report(report, "HC policy gradient");
    mtd.report(report, "monolithic TD loss");
    mpg.report(report, "monolithic policy gradient");
    report.push(
        S,
        "last-action gradient of H + C equals that of C",
        exact_identity && worst_action < GRADIENT_TOL,
        format!("H unchanged bitwise: {exact_identity}, worst relative error {worst_action:.3e}"),
    );
    Ok(())
}

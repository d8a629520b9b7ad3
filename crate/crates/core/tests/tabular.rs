use drmdp_core::counterexamples::{
    best_in_class, build_fixture, off_policy_bias_example, reproduce_fixed_point_bias, FixtureName, PolicyClass,
};
use drmdp_core::drmdp::random::{random_spec, RandomReward, RandomSpecConfig};
use drmdp_core::drmdp::{check_pi_condition, DrmdpSpec, IntervalLaw, PolicyS, RewardKind, Step};
use drmdp_core::tabular::classical::{classical_optimal, classical_q};
use drmdp_core::tabular::{
    bellman_sweep, exact_q_by_enumeration, off_policy_bias_report, policy_improve, policy_iteration,
    solve_fixed_point, vanilla_q_fixed_point, KeyGraph, TrajectoryQTable,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_policy(spec: &DrmdpSpec, rng: &mut ChaCha8Rng) -> PolicyS {
    use rand::Rng;
    let rng = std::cell::RefCell::new(rng);
    PolicyS::from_rows(spec, |s, _| {
        let avail = spec.available(s);
        let mut row = vec![0.0; spec.num_actions()];
        let raw: Vec<f64> = avail.iter().map(|_| rng.borrow_mut().random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&a, w) in avail.iter().zip(raw) {
            row[a] = w / total;
        }
        let head: f64 = avail[..avail.len() - 1].iter().map(|&a| row[a]).sum();
        row[*avail.last().unwrap()] = 1.0 - head;
        row
    })
    .unwrap()
}

#[test]
fn fixed_point_matches_enumeration_on_layered_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let cfg = RandomSpecConfig {
            size: 3,
            max_width: 2,
            max_actions: 2,
            max_interval: 3,
            overlap: i % 3,
            reward: if i % 2 == 0 { RandomReward::Sum } else { RandomReward::WeightedSum },
            ..Default::default()
        };
        let spec = random_spec(&mut rng, &cfg);
        let pi = random_policy(&spec, &mut rng);
        let graph = KeyGraph::build(&spec).unwrap();
        let q = solve_fixed_point(&graph, &pi, 1e-11, 1_000_000).unwrap();
        let oracle = exact_q_by_enumeration(&spec, &pi, 64).unwrap();
        let d = q.sup_distance(&oracle).unwrap();
        assert!(d < 1e-9, "spec {i}: distance {d}");
    }
}

#[test]
fn sweep_contracts_on_cyclic_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..10 {
        let cfg = RandomSpecConfig { layered: false, size: 4, overlap: i % 3, ..Default::default() };
        let spec = random_spec(&mut rng, &cfg);
        let pi = random_policy(&spec, &mut rng);
        let graph = KeyGraph::build(&spec).unwrap();
        let fixed = solve_fixed_point(&graph, &pi, 1e-12, 1_000_000).unwrap();
        let mut cur = TrajectoryQTable::zeros(&graph);
        let mut prev = cur.sup_distance(&fixed).unwrap();
        for _ in 0..15 {
            cur = bellman_sweep(&cur, &cur, &pi).unwrap();
            let d = cur.sup_distance(&fixed).unwrap();
            assert!(d <= spec.gamma() * prev + 1e-9);
            prev = d;
        }
    }
}

#[test]
fn unit_intervals_reduce_to_classical_mdp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let cfg = RandomSpecConfig { layered: false, size: 4, max_interval: 1, ..Default::default() };
        let spec = random_spec(&mut rng, &cfg);
        let pi = random_policy(&spec, &mut rng);
        let graph = KeyGraph::build(&spec).unwrap();
        let q = solve_fixed_point(&graph, &pi, 1e-12, 1_000_000).unwrap();
        let classical = classical_q(&spec, &pi, 1e-12).unwrap();
        for (key, v) in q.iter() {
            let Step::Act { state, action } = key[0] else { panic!() };
            assert!((v - classical[state * spec.num_actions() + action]).abs() < 1e-9);
        }
        let vanilla = vanilla_q_fixed_point(&spec, &[(1.0, pi.clone())], 1e-12).unwrap();
        for (key, v) in q.iter() {
            let Step::Act { state, action } = key[0] else { panic!() };
            assert!((vanilla.get(state, action).unwrap() - v).abs() < 1e-9);
        }
        let (_, best) = classical_optimal(&spec, 1e-12).unwrap();
        let pi_run = policy_iteration(&spec, &PolicyS::uniform(&spec), 30).unwrap();
        assert!(pi_run.converged);
        for s in 0..spec.num_states() {
            if !spec.is_absorbing(s) && q.iter().any(|(k, _)| k[0].state() == Some(s)) {
                assert_eq!(pi_run.final_policy().mode(s, 0), best.mode(s, 0));
            }
        }
    }
}

#[test]
fn fixtures_build_at_several_discounts() {
    for gamma in [0.5, 0.9, 0.99] {
        for name in FixtureName::ALL {
            let f = build_fixture(name, gamma).unwrap();
            assert!(f.checks.iter().all(|c| c.passed()));
        }
    }
}

#[test]
fn xor_fixture_violates_pi_with_expected_witness() {
    let f = build_fixture(FixtureName::XorPolicyClass, 0.9).unwrap();
    let report = check_pi_condition(&f.spec, 2).unwrap();
    assert!(!report.holds);
    let w = report.witness.unwrap();
    let fmt = |s: &[Step]| f.spec.format_segment(s);
    assert_eq!(fmt(&w.head1), "A0.a0");
    assert_eq!(fmt(&w.head2), "A1.a1");
    assert_eq!(fmt(&w.tail1), "B.b0");
    assert_eq!(fmt(&w.tail2), "B.b1");
    let tau = best_in_class(&f.spec, PolicyClass::PiTau).unwrap();
    let s = best_in_class(&f.spec, PolicyClass::PiS).unwrap();
    assert_eq!(tau.policies_evaluated, 4);
    assert_eq!(s.policies_evaluated, 2);
}

#[test]
fn optimal_not_in_pi_s_gap() {
    let f = build_fixture(FixtureName::OptimalNotInPiS, 0.99).unwrap();
    assert!(check_pi_condition(&f.spec, 2).unwrap().holds);
    let tau = best_in_class(&f.spec, PolicyClass::PiTau).unwrap();
    let s = best_in_class(&f.spec, PolicyClass::PiS).unwrap();
    assert!((tau.value - 7.35075).abs() < 1e-9);
    assert!((s.value - 4.9995).abs() < 1e-9);
}

#[test]
fn fixed_point_bias_report() {
    let r = reproduce_fixed_point_bias(0.99).unwrap();
    assert!((r.vanilla_final_j + 0.49005).abs() < 1e-9);
    assert!(r.new_q_final_j.abs() < 1e-9);
    for run in &r.vanilla_runs {
        assert_eq!(run.final_p, 0.0);
    }
    for row in &r.p_sweep {
        let exact = (row.p - 1.0) / (row.p + 1.0);
        assert!((row.q_d_d - exact).abs() < 1e-9, "{row:?}");
        assert!((row.q_a_a1 - 0.99 * exact).abs() < 1e-9);
    }
}

#[test]
fn off_policy_bias_example_values() {
    let (spec, differing, last_only) = off_policy_bias_example().unwrap();
    let r = off_policy_bias_report(&spec, &differing).unwrap();
    let s1 = spec.state_id("S1").unwrap();
    assert!((r.bias(s1, spec.action_id("x").unwrap()).unwrap() - 0.1).abs() < 1e-12);
    assert!((r.bias(s1, spec.action_id("y").unwrap()).unwrap() - 0.9).abs() < 1e-12);
    assert!(r.varies());
    let r = off_policy_bias_report(&spec, &last_only).unwrap();
    assert!(!r.varies());
    let r = off_policy_bias_report(&spec, &[differing[0].clone(), differing[0].clone()]).unwrap();
    assert!(!r.varies());
}

#[test]
fn improvement_is_history_independent_on_monotone_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let cfg = RandomSpecConfig { reward: RandomReward::MonotoneMax, size: 4, ..Default::default() };
        let spec = random_spec(&mut rng, &cfg);
        assert_eq!(spec.reward().kind(), RewardKind::Max);
        assert!(check_pi_condition(&spec, spec.interval_law().max_len()).unwrap().holds);
        let run = policy_iteration(&spec, &PolicyS::uniform(&spec), 20).unwrap();
        assert!(run.converged);
        for w in run.returns.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        let imp = policy_improve(&run.tables[0]).unwrap();
        assert!(imp.pi_violation.is_none());
    }
}

#[test]
fn law_hazards_round_trip() {
    let law = IntervalLaw::new(vec![(1, 0.2), (3, 0.5), (4, 0.3)]).unwrap();
    let hz: Vec<f64> = (1..=4).map(|k| law.hazard(k)).collect();
    let back = IntervalLaw::probs_from_hazards(&hz);
    for (k, q) in back.iter().enumerate() {
        assert!((q - law.prob(k + 1)).abs() < 1e-12);
    }
}

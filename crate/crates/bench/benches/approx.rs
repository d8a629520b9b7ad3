use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use drmdp_core::approx::{
    hc_policy_gradient, hc_td_loss, monolithic_td_loss, DeterministicPolicy, FeatureLayout, HKind, HcCritic, Mlp,
    MlpArch, MonolithicCritic, TdSettings,
};
use drmdp_core::experiment::gradcheck::synthetic_records;
use drmdp_core::experiment::ReplayRecord;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::new(MlpArch::scalar(5, &[32, 32]), &mut rng);
    let x = Array2::from_elem((64, 5), 0.3);
    c.bench_function("mlp 5-32-32-1 forward batch 64", |b| b.iter(|| net.forward_batch(black_box(x.view()))));
    c.bench_function("mlp 5-32-32-1 forward+backward batch 64", |b| {
        let dy = Array2::ones((64, 1));
        let mut grad = vec![0.0; net.num_params()];
        b.iter(|| {
            let tape = net.forward_tape(black_box(x.view()));
            net.backward(&tape, dy.view(), &mut grad)
        })
    });
}

fn losses(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layout = FeatureLayout::new(2, 2, 8);
    let records = synthetic_records(&mut rng, layout, 0, 64);
    let batch: Vec<&ReplayRecord> = records.iter().collect();
    let policy = DeterministicPolicy::new(layout, &[32, 32], &mut rng);
    let settings = TdSettings { gamma: 0.99, overlap: 0 };
    for kind in [HKind::Singleton, HKind::PairwiseK(1)] {
        let critic = HcCritic::new(kind, layout, &[32, 32], 0.05, &mut rng);
        c.bench_function(&format!("hc_td_loss {} batch 64", kind.name()), |b| {
            b.iter(|| hc_td_loss(black_box(&critic), &batch, &policy, settings).unwrap())
        });
        c.bench_function(&format!("hc_policy_gradient {} batch 64", kind.name()), |b| {
            b.iter(|| hc_policy_gradient(black_box(&critic), &batch, &policy).unwrap())
        });
    }
    let mono = MonolithicCritic::new(layout, 8, &[32, 32], &mut rng);
    c.bench_function("monolithic_td_loss batch 64", |b| {
        b.iter(|| monolithic_td_loss(black_box(&mono), &batch, &policy, settings).unwrap())
    });
}

criterion_group!(benches, networks, losses);
criterion_main!(benches);

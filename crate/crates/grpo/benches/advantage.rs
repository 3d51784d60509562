use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowsql_grpo::{anchored_advantage_batch, anchored_advantage_batch_seq, RewardConfig};

fn batch(groups: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rewards = (0..groups * size).map(|_| rng.gen_range(-3.0..3.0)).collect();
    (rewards, vec![size; groups])
}

fn advantage(c: &mut Criterion) {
    let cfg = RewardConfig::default();
    let mut g = c.benchmark_group("anchored_advantage_batch");
    for groups in [64, 4096] {
        let (r, sizes) = batch(groups, 16);
        g.bench_with_input(BenchmarkId::new("sequential", groups), &groups, |b, _| {
            b.iter(|| anchored_advantage_batch_seq(&r, &sizes, &cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("parallel", groups), &groups, |b, _| {
            b.iter(|| anchored_advantage_batch(&r, &sizes, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, advantage);
criterion_main!(benches);

//! Sequential vs parallel execution of the batch paths: the smoothness
//! sampler, a wide dictionary scan, and a small sweep.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use greedy_banach::analysis::{check_ll0_with, LL0_TOL};
use greedy_banach::dictionary::{dict_dual_norm, generate_dictionary, DictKind};
use greedy_banach::harness::{run_sweep_with, SweepSpec};
use greedy_banach::par::Exec;
use greedy_banach::space::{gaussian_vector, norming_functional};
use greedy_banach::LpSpace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn modes() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn ll0(c: &mut Criterion) {
    let space = LpSpace::new(3.0, 32).unwrap();
    let mut group = c.benchmark_group("ll0_samples");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, 2000), |b| {
            b.iter(|| check_ll0_with(exec, black_box(&space), 2000, 1, LL0_TOL).unwrap())
        });
    }
    group.finish();
}

fn dictionary_scan(c: &mut Criterion) {
    // the scan itself picks its strategy by size; this measures the
    // evaluation that dominates each greedy step
    let space = LpSpace::new(1.5, 256).unwrap();
    let dict = generate_dictionary(&space, 4096, DictKind::Gaussian, 3).unwrap();
    let h = gaussian_vector(&mut ChaCha8Rng::seed_from_u64(4), 256);
    let f = norming_functional(&space, &h).unwrap();
    c.bench_function("dictionary_dual_norm_4096x256", |b| {
        b.iter(|| dict_dual_norm(black_box(&f), &dict).unwrap())
    });
}

const SWEEP: &str = r#"
replicate_seeds = 4
axes = [{ field = "space.p", values = [1.5, 2.0, 3.0] }]

[base.space]
p = 2.0
dim = 16

[base.dictionary]
kind = "gaussian"
count = 64

[base.target]
membership = "a1"
sparsity = 6

[base.algorithm]
id = "wgafr"
iters = 40
"#;

fn sweep(c: &mut Criterion) {
    let spec = SweepSpec::from_toml(SWEEP).unwrap();
    let mut group = c.benchmark_group("sweep_12_cells");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| run_sweep_with(exec, black_box(&spec), None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ll0, dictionary_scan, sweep);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use robust_mckp::generators::{gen_synthetic, SyntheticConfig};
use robust_mckp::stress::{stress, StressConfig};
use robust_mckp::{solve, Execution, SolveOptions};

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ]
}

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in [50usize, 100] {
        let inst = gen_synthetic(&SyntheticConfig {
            n,
            m: 20,
            seed: 42,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let gamma = n / 10;
        for (name, execution) in modes() {
            let opts = SolveOptions {
                execution,
                ..SolveOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &inst, |b, inst| {
                b.iter(|| solve(inst, gamma, opts).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_stress(c: &mut Criterion) {
    let inst = gen_synthetic(&SyntheticConfig {
        n: 200,
        m: 10,
        seed: 42,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let choice = solve(&inst, 10, SolveOptions::default())
        .unwrap()
        .best
        .unwrap()
        .choice;
    let cfg = StressConfig {
        scenarios: 10_000,
        gamma_attack: 15,
        seed: 1,
        ..StressConfig::default()
    };
    let mut group = c.benchmark_group("stress");
    group.sample_size(10);
    for (name, execution) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| stress(&inst, &choice, &cfg, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve, bench_stress);
criterion_main!(benches);

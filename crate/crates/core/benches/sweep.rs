//! Seeds of one experiment run one after another vs across the rayon pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vropt::harness::config::SyntheticSpec;
use vropt::harness::{data, runner, Algo, ExperimentConfig};
use vropt::par::ExecMode;

fn sweep(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::new(Algo::RrV2);
    cfg.experiment.budget_passes = Some(10.0);
    cfg.experiment.seeds = (0..8).collect();
    cfg.data.synthetic = Some(SyntheticSpec {
        n: 2000,
        d: 50,
        seed: 7,
    });
    let loaded = data::load(&cfg.data).unwrap();

    let mut group = c.benchmark_group("sweep_8_seeds");
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter("sequential"), |b| {
        b.iter(|| runner::run_on_with(&cfg, &loaded, ExecMode::Sequential).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function(BenchmarkId::from_parameter("parallel"), |b| {
        b.iter(|| runner::run_on_with(&cfg, &loaded, ExecMode::Parallel).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);

//! Parallel versus sequential stepping. Without the `parallel` feature both
//! variants run the sequential path.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pacla::pattern_memory::{PatternConfig, PatternLayer};
use pacla::rng::SeededRng;
use pacla::transition_memory::{TmConfig, TmLayer};
use pacla::Sdr;
use rand::seq::index::sample;

fn inputs(n: usize) -> Vec<Sdr> {
    let mut rng = SeededRng::new(3);
    (0..n)
        .map(|_| Sdr::new(1024, sample(&mut rng, 1024, 20).into_iter()).unwrap())
        .collect()
}

fn columns() -> PatternConfig {
    PatternConfig {
        input_size: 1024,
        size: 2048,
        sparsity: 0.02,
        ..PatternConfig::default()
    }
}

fn pattern_memory(c: &mut Criterion) {
    let xs = inputs(16);
    let mut group = c.benchmark_group("compute_sdr");
    for parallel in [false, true] {
        let mut layer = PatternLayer::new(columns()).unwrap();
        layer.set_parallel(parallel);
        let name = if parallel { "parallel" } else { "sequential" };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % xs.len();
                black_box(layer.compute_sdr(&xs[i]).unwrap())
            })
        });
    }
    group.finish();
}

fn transition_memory(c: &mut Criterion) {
    let xs = inputs(8);
    let mut group = c.benchmark_group("tm_step");
    for parallel in [false, true] {
        let mut tm = TmLayer::new(TmConfig {
            columns: columns(),
            ..TmConfig::default()
        })
        .unwrap();
        tm.set_parallel(parallel);
        for _ in 0..5 {
            for x in &xs {
                tm.step(x, true).unwrap();
            }
        }
        let name = if parallel { "parallel" } else { "sequential" };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % xs.len();
                black_box(tm.step(&xs[i], true).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pattern_memory, transition_memory);
criterion_main!(benches);

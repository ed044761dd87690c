//! Data-parallel hot paths, rayon vs the sequential reference.
//!
//! Run with `cargo bench -p cslbound`. With the default `parallel` feature
//! the "par" benches fan out on the rayon pool; building with
//! `--no-default-features` makes every path sequential (the public API
//! then uses the fallback), which is the comparison the feature flag
//! exists for.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cslbound::csl::{csl_psd_multilayer, CslParams, QuadConfig};
use cslbound::mass::MultilayerStack;
use cslbound::parallel::{map_ordered, map_ordered_seq};
use cslbound::thermal::{FcBelt, FcConfig};

fn experiment_stack() -> MultilayerStack {
    MultilayerStack::new(
        7.17e3,
        2.2e3,
        23,
        370e-9,
        113e-6,
        82e-6,
        [0.0; 3],
        [0.0, 0.0, 1.0],
    )
    .unwrap()
}

fn rc_grid() -> Vec<f64> {
    (0..16)
        .map(|i| 3e-8 * (10f64).powf(i as f64 / 10.0))
        .collect()
}

fn bench_psd_scan(c: &mut Criterion) {
    let stack = experiment_stack();
    let grid = rc_grid();
    let cfg = QuadConfig::default_1d();
    let eval = |rc: &f64| {
        let p = CslParams::new(1.0, *rc).unwrap();
        csl_psd_multilayer(&stack, &p, &cfg).unwrap()
    };

    let mut group = c.benchmark_group("multilayer_psd_scan");
    group.sample_size(10);
    group.bench_function("seq", |b| {
        b.iter(|| black_box(map_ordered_seq(&grid, eval)))
    });
    group.bench_function("par", |b| b.iter(|| black_box(map_ordered(&grid, eval))));
    group.finish();
}

fn bench_fc_belt(c: &mut Criterion) {
    // belt construction maps the acceptance solver over the mu grid; with
    // the parallel feature it fans out, without it this is the sequential
    // timing
    let cfg = FcConfig::default();
    let mut group = c.benchmark_group("fc_belt_build");
    group.sample_size(10);
    group.bench_function("default_path", |b| {
        b.iter(|| black_box(FcBelt::build(3.0, 0.95, &cfg).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_psd_scan, bench_fc_belt);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dsf_bench::{gaussian, layer, spd, third_split};
use dsf_core::admm::{admm_search_mask, problem_from_design, Schedule};
use dsf_core::baselines::{magnitude_prune, monarch_project};
use dsf_core::dsf::{dsf_project, DsfConfig, SplitPolicy};
use dsf_core::layerwise::{prune_layer, PruneOptions};
use dsf_core::numerics::{matmul, sym_eigen};

fn dense_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    for n in [32, 64, 128] {
        let (a, b) = (gaussian(1, n, n), gaussian(2, n, n));
        g.bench_with_input(BenchmarkId::new("matmul", n), &n, |bch, _| {
            bch.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
        let s = spd(3, n);
        g.bench_with_input(BenchmarkId::new("sym_eigen", n), &n, |bch, _| {
            bch.iter(|| sym_eigen(black_box(&s)).unwrap())
        });
    }
    g.finish();
}

fn admm(c: &mut Criterion) {
    let mut g = c.benchmark_group("admm_search");
    for n in [16, 32] {
        let x = gaussian(4, 2 * n, n);
        let w = gaussian(5, n, n);
        let prob = problem_from_design(&x, &w).unwrap();
        let z = n * n / 4;
        let sched = Schedule::cubic(20, 0.25);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| admm_search_mask(black_box(&prob), z, 30, &sched, None, 1.0).unwrap())
        });
    }
    g.finish();
}

fn projections(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection");
    g.sample_size(10);
    let n = 64;
    let w = gaussian(6, n, n);
    let split = third_split(n, n, 0.25);
    g.bench_function("dsf_64", |bch| {
        bch.iter(|| dsf_project(black_box(&w), &split, &DsfConfig::new(10, 5)).unwrap())
    });
    g.bench_function("magnitude_64", |bch| {
        bch.iter(|| magnitude_prune(black_box(&w), n * n / 4).unwrap())
    });
    g.bench_function("monarch_64", |bch| {
        bch.iter(|| monarch_project(black_box(&w), 8).unwrap())
    });
    let (lw, calib) = layer(7, 32);
    g.bench_function("prune_layer_32", |bch| {
        bch.iter(|| {
            prune_layer(
                black_box(&lw),
                &calib,
                256,
                SplitPolicy::ThirdSplit,
                &DsfConfig::new(10, 5),
                &PruneOptions::default(),
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, dense_kernels, admm, projections);
criterion_main!(benches);

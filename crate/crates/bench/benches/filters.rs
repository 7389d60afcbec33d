//! Criterion benchmarks: descriptor construction, the two trichotomy
//! filters at a fixed outlier ratio, subdivision variants, and the
//! RANSAC baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vtm_core::{
    build_state, generate_scene, ransac_affine, rfvtm, vtm_subdivided, DescriptorConfig,
    RansacConfig, RfvtmConfig, SceneConfig, VtmConfig,
};

fn scene(n_inliers: u32, outlier_ratio: f64, seed: u64) -> vtm_core::CorrespondenceSet {
    let cfg = SceneConfig {
        n_inliers,
        outlier_ratio,
        rotation_deg: 60.0,
        scale: 1.5,
        noise_sigma: 0.5,
        seed,
        ..SceneConfig::default()
    };
    generate_scene(&cfg).unwrap().0
}

fn bench_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("descriptor_build");
    group.sample_size(20);
    for &n in &[50usize, 200, 400] {
        let corr = scene(n as u32, 0.0, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &corr, |b, corr| {
            b.iter(|| black_box(build_state(corr, &DescriptorConfig::default()).unwrap()))
        });
    }
    group.finish();
}

fn bench_filters(c: &mut Criterion) {
    let mut group = c.benchmark_group("filter_half_outliers");
    group.sample_size(10);
    let corr = scene(100, 0.5, 2);
    group.bench_function("vtm", |b| {
        b.iter(|| black_box(vtm_subdivided(&corr, 1, 0, &VtmConfig::default()).unwrap()))
    });
    group.bench_function("rfvtm", |b| {
        b.iter(|| black_box(rfvtm(&corr, &RfvtmConfig::default()).unwrap()))
    });
    group.bench_function("ransac", |b| {
        b.iter(|| black_box(ransac_affine(&corr, &RansacConfig::default()).unwrap()))
    });
    group.finish();
}

fn bench_subdivision(c: &mut Criterion) {
    let mut group = c.benchmark_group("subdivision");
    group.sample_size(10);
    let corr = scene(117, 210.0 / 327.0, 3);
    for &m in &[1usize, 5, 10] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| black_box(vtm_subdivided(&corr, m, 7, &VtmConfig::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_build, bench_filters, bench_subdivision);
criterion_main!(benches);

//! Sequential versus rayon for the data-parallel stages. Without the
//! `parallel` feature both arms run the same loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geonet_core::eikonal::{solve, Scheme, ZeroSet};
use geonet_core::paths::{
    build_network_with, detect_plane_contour, surface_coverage_with, TraceParams,
};
use geonet_core::phantom::{build_metric_with, make_phantom_with};
use geonet_core::pipeline::{coverage_mask, Config};
use geonet_core::par::Parallelism;
use geonet_core::Vec3;

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn config() -> Config {
    let mut cfg = Config::default();
    cfg.grid.dims = [48, 48, 48];
    cfg.seed_point = Some(Vec3::new(10.0, 23.5, 23.5));
    cfg.plane.point = Some(Vec3::new(31.5, 23.5, 23.5));
    cfg
}

fn stages(c: &mut Criterion) {
    let cfg = config();
    let lat = cfg.lattice().unwrap();
    let specs = cfg.specs(&lat);
    let img = make_phantom_with(&specs, &lat, 0.02, 7, Parallelism::Sequential).unwrap();
    let phi = build_metric_with(&img, &cfg.metric, Parallelism::Sequential).unwrap();
    let plane = cfg.plane(&lat).unwrap();
    let seed = cfg.seed_point(&lat);
    let contour = detect_plane_contour(&img, &plane, cfg.contour.iso).unwrap();
    let zs = ZeroSet::ball(seed, cfg.solver.zero_set_radius);
    let arrival = solve(&phi, &zs, &cfg.solver_config(Scheme::Baseline, plane.clone())).unwrap();
    let params = TraceParams::for_lattice(&lat, phi.min_max().0);
    let net = build_network_with(&arrival, &contour, &params, Parallelism::Sequential).unwrap();
    let surface = coverage_mask(&cfg, &lat, &plane, &seed);

    let mut g = c.benchmark_group("stages");
    g.sample_size(10);
    for (name, par) in MODES {
        g.bench_with_input(BenchmarkId::new("phantom", name), &par, |b, &par| {
            b.iter(|| make_phantom_with(&specs, &lat, 0.02, 7, par).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("metric", name), &par, |b, &par| {
            b.iter(|| build_metric_with(&img, &cfg.metric, par).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("network", name), &par, |b, &par| {
            b.iter(|| build_network_with(&arrival, &contour, &params, par).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("coverage", name), &par, |b, &par| {
            b.iter(|| surface_coverage_with(&net, &surface, 1.5, par).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);

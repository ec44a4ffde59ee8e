//! End-to-end timings for the hot paths: spectral products on both
//! backends, ladder application, transport reconstruction, series
//! products, and cone integration.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use gtl_bench::{flat, invariant_series, planted_transport, seeded_stack, sphere, trim_sphere_coeffs};
use gtl_core::cone::{self, CurvatureProfile};

fn bench_sphere_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("sphere_product");
    for lmax in [12usize, 16, 24] {
        let surface = sphere(lmax);
        let stack = seeded_stack(&surface, 2, 7);
        let half = (lmax / 2) as i32;
        let a = trim_sphere_coeffs(&surface, 1, stack.coeffs_or_zero(1).unwrap(), half);
        let b = trim_sphere_coeffs(&surface, -1, stack.coeffs_or_zero(-1).unwrap(), half);
        group.bench_function(format!("lmax_{lmax}"), |bench| {
            bench.iter(|| surface.multiply(1, black_box(&a), -1, black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_torus_ladder(c: &mut Criterion) {
    let mut group = c.benchmark_group("torus_ladder");
    for resolution in [32usize, 64, 128] {
        let surface = flat(resolution);
        let stack = seeded_stack(&surface, 2, 7);
        let coeffs = stack.coeffs_or_zero(0).unwrap();
        group.bench_function(format!("res_{resolution}"), |bench| {
            bench.iter(|| surface.eta_plus(0, black_box(&coeffs)).unwrap())
        });
    }
    group.finish();
}

fn bench_transport_reconstruct(c: &mut Criterion) {
    let mut group = c.benchmark_group("transport_reconstruct");
    for lmax in [12usize, 16] {
        let surface = sphere(lmax);
        let (problem, u0, u1) = planted_transport(&surface, 4, 7);
        group.bench_function(format!("lmax_{lmax}_kmax_4"), |bench| {
            bench.iter(|| problem.reconstruct(black_box(&u0), black_box(&u1), 4).unwrap())
        });
    }
    group.finish();
}

fn bench_series_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("series_product");
    let surface = flat(32);
    for band in [8i32, 16] {
        let a = invariant_series(&surface, band, 7);
        let b = invariant_series(&surface, band, 8);
        group.bench_function(format!("band_{band}"), |bench| {
            bench.iter(|| black_box(&a).product(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_cone_integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("cone");
    let wobble = CurvatureProfile::Sinusoid { offset: -1.0, amp: 0.5, freq: 1.0, phase: 0.0 };
    group.bench_function("projective_t20", |bench| {
        bench.iter(|| cone::integrate_projective(black_box(&wobble), [0.0, 1.0], 20.0).unwrap())
    });
    group.bench_function("riccati_limits_t20", |bench| {
        bench.iter(|| cone::riccati_limits(black_box(&wobble), 20.0).unwrap())
    });
    let focusing = CurvatureProfile::Constant(1.0);
    group.bench_function("conjugate_points_t10", |bench| {
        bench.iter(|| {
            let traj = cone::integrate_projective(black_box(&focusing), [0.0, 1.0], 10.0).unwrap();
            cone::crossing_analysis(&traj).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_sphere_product,
    bench_torus_ladder,
    bench_transport_reconstruct,
    bench_series_product,
    bench_cone_integration
);
criterion_main!(benches);

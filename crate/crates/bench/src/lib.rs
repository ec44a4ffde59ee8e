//! Shared fixtures for the criterion benchmarks: deterministic surfaces,
//! random-but-seeded mode data, and planted transport problems.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gtl_core::geometry::{build_surface, Surface, SurfaceConfig};
use gtl_core::modes::{ModeSection, ModeStack};
use gtl_core::operators::random_headroom_stack;
use gtl_core::transport::TransportProblem;
use gtl_core::twistor::TwistorSeries;

pub fn flat(resolution: usize) -> Arc<Surface> {
    build_surface(&SurfaceConfig::unit_flat_torus(resolution)).unwrap()
}

pub fn sphere(lmax: usize) -> Arc<Surface> {
    build_surface(&SurfaceConfig::round_sphere(lmax)).unwrap()
}

/// Band-limited random stack with product headroom, fixed seed.
pub fn seeded_stack(surface: &Arc<Surface>, kspan: i32, seed: u64) -> ModeStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_headroom_stack(surface, kspan, &mut rng).unwrap()
}

/// Zero sphere harmonics above `l_cap` so products of two sections stay
/// inside the backend band.
pub fn trim_sphere_coeffs(
    surface: &Arc<Surface>,
    k: i32,
    mut coeffs: Vec<Complex64>,
    l_cap: i32,
) -> Vec<Complex64> {
    if let Some(slots) = surface.sphere_slots(k) {
        for (slot, (l, _)) in slots.into_iter().enumerate() {
            if l > l_cap {
                coeffs[slot] = Complex64::default();
            }
        }
    }
    coeffs
}

/// Flow-invariant boundary series of the given band on a flat torus.
pub fn invariant_series(surface: &Arc<Surface>, band: i32, seed: u64) -> TwistorSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stack = ModeStack::new(surface.clone());
    for k in 0..=band {
        let amp = 0.8f64.powi(k);
        let re = amp * rand::Rng::gen_range(&mut rng, -1.0..1.0);
        let im = amp * rand::Rng::gen_range(&mut rng, -1.0..1.0);
        stack
            .insert(ModeSection::constant(surface.clone(), k, Complex64::new(re, im)).unwrap())
            .unwrap();
    }
    TwistorSeries::extend(&stack, 0).unwrap()
}

/// Transport data planted from a random smooth stack: returns the problem
/// plus the two boundary modes that determine the solution.
pub fn planted_transport(
    surface: &Arc<Surface>,
    kmax: i32,
    seed: u64,
) -> (TransportProblem, ModeSection, ModeSection) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ModeStack::new(surface.clone());
    for k in -kmax..=kmax {
        u.insert(ModeSection::random(surface.clone(), k, &mut rng).unwrap())
            .unwrap();
    }
    let phi = ModeSection::constant(surface.clone(), 0, Complex64::new(1.0, 0.0)).unwrap();
    let probe = TransportProblem::new(
        surface.clone(),
        phi.clone(),
        ModeStack::new(surface.clone()),
        kmax + 1,
    )
    .unwrap();
    let f = probe.apply(&u).unwrap();
    let problem = TransportProblem::new(surface.clone(), phi, f, kmax + 1).unwrap();
    let u0 = ModeSection::new(surface.clone(), 0, u.coeffs_or_zero(0).unwrap()).unwrap();
    let u1 = ModeSection::new(surface.clone(), 1, u.coeffs_or_zero(1).unwrap()).unwrap();
    (problem, u0, u1)
}

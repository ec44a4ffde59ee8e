//! Property tests of the structural identities the crate is built around:
//! randomized inputs, fixed invariants.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gtl_core::cone::{self, CurvatureProfile};
use gtl_core::geometry::{build_surface, LambdaWave, Surface, SurfaceConfig};
use gtl_core::modes::{fit_decay_exponent, szego, ModeSection, ModeStack};
use gtl_core::operators::{self, GeometricOp};
use gtl_core::twistor::TwistorSeries;

fn backends() -> Vec<Arc<Surface>> {
    vec![
        build_surface(&SurfaceConfig::unit_flat_torus(16)).unwrap(),
        build_surface(&SurfaceConfig::round_sphere(8)).unwrap(),
        build_surface(&SurfaceConfig::conformal_torus(
            32,
            vec![
                LambdaWave { n: [1, 0], re: 0.05, im: 0.0 },
                LambdaWave { n: [-1, 0], re: 0.05, im: 0.0 },
            ],
        ))
        .unwrap(),
    ]
}

fn stack_inner(a: &ModeStack, b: &ModeStack) -> Complex64 {
    let surface = a.surface();
    let mut acc = Complex64::default();
    for (&k, sec) in a.iter() {
        let other = b.coeffs_or_zero(k).unwrap();
        acc += surface.inner(k, sec.coeffs(), &other).unwrap();
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// The generator is skew-adjoint: <X u, v> + <u, X v> = 0 on random
    /// band-limited stacks, on every backend.
    #[test]
    fn generator_is_skew_adjoint(seed in any::<u64>()) {
        for surface in backends() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = operators::random_headroom_stack(&surface, 3, &mut rng).unwrap();
            let v = operators::random_headroom_stack(&surface, 3, &mut rng).unwrap();
            let xu = operators::apply(&GeometricOp::X, &u).unwrap();
            let xv = operators::apply(&GeometricOp::X, &v).unwrap();
            let lhs = stack_inner(&xu, &v);
            let rhs = stack_inner(&u, &xv);
            let scale = u.total_l2() * v.total_l2() + f64::EPSILON;
            prop_assert!(
                (lhs + rhs).norm() / scale < 1e-8,
                "{}: <Xu,v> = {lhs}, <u,Xv> = {rhs}",
                surface.label()
            );
        }
    }

    /// The ladder energy identity holds on random sections of every degree
    /// in the working range, on every backend.
    #[test]
    fn energy_identity_holds_on_random_sections(seed in any::<u64>()) {
        for surface in backends() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in -4..=4 {
                let stack = operators::random_headroom_stack(&surface, 4, &mut rng).unwrap();
                let sec = ModeSection::new(
                    surface.clone(),
                    k,
                    stack.coeffs_or_zero(k).unwrap(),
                ).unwrap();
                if sec.norm() == 0.0 {
                    continue;
                }
                let id = operators::pestov_check(&sec).unwrap();
                prop_assert!(
                    id.residual < 1e-8,
                    "{} k = {k}: residual {:.3e}",
                    surface.label(),
                    id.residual
                );
            }
        }
    }

    /// Dropping negative modes is idempotent and self-adjoint, exactly.
    #[test]
    fn holomorphic_projection_is_exact_orthogonal(seed in any::<u64>()) {
        for surface in backends() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ModeStack::random(surface.clone(), -4, 4, &mut rng).unwrap();
            let g = ModeStack::random(surface.clone(), -4, 4, &mut rng).unwrap();
            let (sf, _) = szego(&f);
            let (ssf, _) = szego(&sf);
            for (&k, sec) in sf.iter() {
                let twice = ssf.coeffs_or_zero(k).unwrap();
                prop_assert_eq!(sec.coeffs(), twice.as_slice());
            }
            let (sg, _) = szego(&g);
            let lhs = stack_inner(&sf, &g);
            let rhs = stack_inner(&f, &sg);
            prop_assert_eq!(lhs, rhs, "{}", surface.label());
        }
    }

    /// Pointwise multiplication of sections commutes bitwise: both factor
    /// orders run the identical grid product.
    #[test]
    fn section_products_commute_bitwise(seed in any::<u64>()) {
        for surface in backends() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = operators::random_headroom_stack(&surface, 2, &mut rng).unwrap();
            let mut a = u.coeffs_or_zero(1).unwrap();
            let mut b = u.coeffs_or_zero(-2).unwrap();
            // Products sum harmonic supports; halve them so the band guard
            // has room.
            if let Some(slots) = surface.sphere_slots(1) {
                for (slot, (l, _)) in slots.into_iter().enumerate() {
                    if l > 3 {
                        a[slot] = Complex64::default();
                    }
                }
            }
            if let Some(slots) = surface.sphere_slots(-2) {
                for (slot, (l, _)) in slots.into_iter().enumerate() {
                    if l > 3 {
                        b[slot] = Complex64::default();
                    }
                }
            }
            let ab = surface.multiply(1, &a, -2, &b).unwrap();
            let ba = surface.multiply(-2, &b, 1, &a).unwrap();
            prop_assert_eq!(ab, ba, "{}", surface.label());
        }
    }

    /// The decay-exponent fit recovers a planted power law exactly enough
    /// to classify it.
    #[test]
    fn decay_fit_recovers_planted_exponent(
        seed in any::<u64>(),
        p in 0u32..4,
        amp in 0.25f64..4.0,
    ) {
        let _ = seed;
        let ks: Vec<i32> = (0..=32).collect();
        let norms: Vec<f64> = ks
            .iter()
            .map(|k| amp * ((k * k + 1) as f64).sqrt().powi(p as i32))
            .collect();
        let fit = fit_decay_exponent(&ks, &norms).unwrap();
        prop_assert!(
            (fit.exponent - p as f64).abs() < 0.05,
            "planted {p}, fitted {:.3}",
            fit.exponent
        );
    }

    /// Power-series extension followed by the boundary trace returns the
    /// stack bit for bit.
    #[test]
    fn extension_trace_round_trip_is_exact(seed in any::<u64>(), m in -2i32..3) {
        for surface in backends() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = ModeStack::random(surface.clone(), m, m + 5, &mut rng).unwrap();
            let series = TwistorSeries::extend(&raw, m).unwrap();
            let back = series.trace();
            for (&k, sec) in raw.iter() {
                let round_trip = back.coeffs_or_zero(k).unwrap();
                prop_assert_eq!(
                    sec.coeffs(),
                    round_trip.as_slice(),
                    "{} k = {}", surface.label(), k
                );
            }
        }
    }

    /// Conjugate times of a constant-curvature profile follow the closed
    /// count, and every crossing is transversal.
    #[test]
    fn conjugate_counts_match_closed_form(c in 0.25f64..2.5) {
        let t_end = 8.0;
        let profile = CurvatureProfile::Constant(c);
        let traj = cone::integrate_projective(&profile, [0.0, 1.0], t_end).unwrap();
        let report = cone::crossing_analysis(&traj).unwrap();
        let expected = (t_end * c.sqrt() / std::f64::consts::PI).floor() as usize;
        prop_assert_eq!(report.conjugate_times.len(), expected, "K = {}", c);
        for cr in &report.crossings {
            prop_assert!(cr.transversal.abs() >= cone::CROSSING_TOL);
        }
    }

    /// Negative constant curvature separates the asymptotic slopes at
    /// +-sqrt(-K) and produces no conjugate points.
    #[test]
    fn negative_curvature_separates_slopes(c in -2.5f64..-0.3) {
        let profile = CurvatureProfile::Constant(c);
        let traj = cone::integrate_projective(&profile, [0.0, 1.0], 8.0).unwrap();
        let report = cone::crossing_analysis(&traj).unwrap();
        prop_assert!(report.conjugate_times.is_empty());

        let limits = cone::riccati_limits(&profile, 15.0).unwrap();
        let root = (-c).sqrt();
        prop_assert!((limits.r_unstable - root).abs() < 1e-5, "{}", limits.r_unstable);
        prop_assert!((limits.r_stable + root).abs() < 1e-5, "{}", limits.r_stable);
        prop_assert!(limits.separated);
    }
}

//! The verification suites behind each subcommand: shared core routines,
//! deterministic random data, tabular artifacts, and pass/fail checks.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gtl_core::cone::{self, CurvatureProfile};
use gtl_core::geometry::{build_surface, Surface, SurfaceConfig, SurfaceKind};
use gtl_core::modes::{ModeSection, ModeStack};
use gtl_core::operators::{
    self, commutator_check, kernel_report, pestov_check, szego_commutator_check, LadderOp,
    KERNEL_GAP,
};
use gtl_core::transport::{stability_sample, TransportProblem};
use gtl_core::twistor::{
    bundle_obstruction, dbar_omega_solve, default_radii, gauge_pullback, gauge_residual,
    trace_and_growth, CoefficientField, DolbeaultTuple, TwistorSeries,
};

use crate::config::{RunConfig, Suite};
use crate::output::{Cell, CheckRow, Summary, Table};
use crate::RunError;

/// Run the configured suite, write its artifacts, and return the summary.
pub fn run(cfg: &RunConfig) -> Result<Summary, RunError> {
    let (tables, checks, surface_label) = match cfg.suite {
        Suite::VerifyStructure => verify_structure(cfg)?,
        Suite::Kernels => kernels(cfg)?,
        Suite::Flaminio => flaminio(cfg)?,
        Suite::Stability => stability(cfg)?,
        Suite::Trace => trace(cfg)?,
        Suite::Algebra => algebra(cfg)?,
        Suite::Dolbeault => dolbeault(cfg)?,
        Suite::Bundle => bundle(cfg)?,
        Suite::Cone => cone_suite(cfg)?,
    };
    // Artifact names are stored relative to the output directory so a rerun
    // into any directory produces byte-identical files.
    let mut artifacts = Vec::new();
    for table in &tables {
        let path = table.write(&cfg.out_dir, cfg.format)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        artifacts.push(name);
    }
    let summary = Summary {
        subcommand: cfg.suite.name().to_string(),
        surface: surface_label,
        seed: cfg.seed,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
        artifacts,
    };
    summary.write(&cfg.out_dir)?;
    Ok(summary)
}

type SuiteOutput = (Vec<Table>, Vec<CheckRow>, Option<String>);

fn surface_of(cfg: &RunConfig) -> Result<Arc<Surface>, RunError> {
    let sc = cfg
        .surface
        .as_ref()
        .ok_or_else(|| RunError::config("a [surface] section is required"))?;
    build_surface(sc).map_err(|e| RunError::config(format!("surface: {e}")))
}

fn named<T>(check: &str, r: gtl_core::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::run(format!("check `{check}` failed to run: {e}")))
}

fn display_label(cfg: &RunConfig) -> String {
    match cfg.surface.as_ref() {
        Some(SurfaceConfig::FlatTorus { resolution, .. }) => format!("flat_torus(res={resolution})"),
        Some(SurfaceConfig::RoundSphere { lmax }) => format!("round_sphere(lmax={lmax})"),
        Some(SurfaceConfig::ConformalTorus { resolution, .. }) => {
            format!("conformal_torus(res={resolution})")
        }
        None => "-".into(),
    }
}

/// Zero the harmonic content above `l_cap` so products and ladder chains
/// stay inside the backend's guarded band.
fn trim_sphere_section(surface: &Arc<Surface>, sec: &mut ModeSection, l_cap: i32) {
    if let Some(slots) = surface.sphere_slots(sec.k()) {
        for (slot, (l, _)) in slots.into_iter().enumerate() {
            if l > l_cap {
                sec.coeffs_mut()[slot] = Complex64::default();
            }
        }
    }
}

/// Zero torus frequencies with `max(|n1|, |n2|) > n_cap` (lattice units).
fn trim_torus_section(surface: &Arc<Surface>, sec: &mut ModeSection, n_cap: f64) {
    if let Some(qs) = surface.torus_frequencies() {
        let tau = std::f64::consts::TAU;
        for (slot, q) in qs.iter().enumerate() {
            if (q[0] / tau).abs().max((q[1] / tau).abs()) > n_cap + 1e-9 {
                sec.coeffs_mut()[slot] = Complex64::default();
            }
        }
    }
}

fn verify_structure(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let tol = cfg.checks.tolerance;
    let kspan = cfg.checks.kspan;
    let trials = cfg.checks.trials;

    let mut checks = Vec::new();
    let mut structure = Table::new("structure", &["check", "residual", "threshold", "pass"]);

    let report = named(
        "commutators",
        commutator_check(&surface, kspan, trials, cfg.seed),
    )?;
    for (label, residual) in &report.residuals {
        let row = CheckRow::residual(label, *residual, tol);
        structure.push(vec![
            Cell::Text(label.clone()),
            Cell::Float(*residual),
            Cell::Float(tol),
            Cell::Bool(row.passed),
        ]);
        checks.push(row);
    }

    // Energy identity per degree, worst case over random stacks.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_by_k = vec![0.0f64; (2 * kspan + 1) as usize];
    let mut flat_worst = 0.0f64;
    for _ in 0..trials {
        let stack = named(
            "energy-identity",
            operators::random_headroom_stack(&surface, kspan, &mut rng),
        )?;
        for (i, k) in (-kspan..=kspan).enumerate() {
            let coeffs = named("energy-identity", stack.coeffs_or_zero(k))?;
            let sec = named(
                "energy-identity",
                ModeSection::new(surface.clone(), k, coeffs),
            )?;
            if sec.norm() == 0.0 {
                continue;
            }
            let id = named("energy-identity", pestov_check(&sec))?;
            worst_by_k[i] = worst_by_k[i].max(id.residual);
            flat_worst = flat_worst.max(id.residual);
        }
    }
    let mut pestov = Table::new("pestov", &["k", "worst_residual"]);
    for (i, k) in (-kspan..=kspan).enumerate() {
        pestov.push(vec![Cell::Int(k as i64), Cell::Float(worst_by_k[i])]);
    }
    let energy_worst = worst_by_k.iter().cloned().fold(0.0, f64::max);
    let row = CheckRow::residual("energy-identity", energy_worst, tol);
    structure.push(vec![
        Cell::Text("energy-identity".into()),
        Cell::Float(energy_worst),
        Cell::Float(tol),
        Cell::Bool(row.passed),
    ]);
    checks.push(row);

    // With zero curvature both ladder norms agree to near machine precision.
    if surface.kind() == SurfaceKind::FlatTorus {
        let row = CheckRow::residual("flat-ladder-equality", flat_worst, 1e-10);
        structure.push(vec![
            Cell::Text("flat-ladder-equality".into()),
            Cell::Float(flat_worst),
            Cell::Float(1e-10),
            Cell::Bool(row.passed),
        ]);
        checks.push(row);
    }

    let mut proj_worst = 0.0f64;
    for _ in 0..trials {
        let stack = named(
            "projection-commutator",
            operators::random_headroom_stack(&surface, kspan, &mut rng),
        )?;
        let res = named("projection-commutator", szego_commutator_check(&stack))?;
        proj_worst = proj_worst.max(res);
    }
    let row = CheckRow::residual("projection-commutator", proj_worst, tol);
    structure.push(vec![
        Cell::Text("projection-commutator".into()),
        Cell::Float(proj_worst),
        Cell::Float(tol),
        Cell::Bool(row.passed),
    ]);
    checks.push(row);

    let label = display_label(cfg);
    Ok((vec![structure, pestov], checks, Some(label)))
}

fn kernels(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let kmax = cfg.checks.kmax;
    let mut table = Table::new(
        "kernels",
        &["op", "k", "dim_numeric", "dim_formula", "sigma_max", "gap", "pass"],
    );
    let mut mismatches = 0i64;
    let mut min_gap = f64::INFINITY;
    for op in [LadderOp::Lower, LadderOp::Raise] {
        for k in -kmax..=kmax {
            let report = named("kernel-dimensions", kernel_report(&surface, op, k))?;
            let pass = report.dim_numeric == report.dim_formula && report.gap >= KERNEL_GAP;
            if report.dim_numeric != report.dim_formula {
                mismatches += 1;
            }
            min_gap = min_gap.min(report.gap);
            table.push(vec![
                Cell::Text(op.name().to_string()),
                Cell::Int(k as i64),
                Cell::Int(report.dim_numeric as i64),
                Cell::Int(report.dim_formula as i64),
                Cell::Float(report.sigma_max),
                Cell::Float(report.gap),
                Cell::Bool(pass),
            ]);
        }
    }
    let checks = vec![
        CheckRow::flag("kernel-dimensions", mismatches == 0, mismatches as f64),
        CheckRow::flag("kernel-gap", min_gap >= KERNEL_GAP, min_gap),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn flaminio(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let kmax = cfg.checks.kspan;
    let l_cap = cfg.checks.degree;
    let band = kmax + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut table = Table::new(
        "flaminio",
        &["phi", "recovery_error", "transport_residual", "pass"],
    );
    let mut checks = Vec::new();
    let cases = [
        ("recovery-phi-0", "0", Complex64::new(0.0, 0.0)),
        ("recovery-phi-1", "1", Complex64::new(1.0, 0.0)),
        ("recovery-phi-i-half", "i/2", Complex64::new(0.0, 0.5)),
    ];
    for (check, label, phi) in cases {
        // Planted smooth solution: random low-harmonic sections per degree.
        let mut u = ModeStack::new(surface.clone());
        for k in -kmax..=kmax {
            let mut sec = named(check, ModeSection::random(surface.clone(), k, &mut rng))?;
            trim_sphere_section(&surface, &mut sec, l_cap);
            named(check, u.insert(sec))?;
        }
        let phi_sec = named(check, ModeSection::constant(surface.clone(), 0, phi))?;
        let empty = ModeStack::new(surface.clone());
        let probe = named(
            check,
            TransportProblem::new(surface.clone(), phi_sec.clone(), empty, band),
        )?;
        let f = named(check, probe.apply(&u))?;

        let problem = named(
            check,
            TransportProblem::new(surface.clone(), phi_sec, f, band),
        )?;
        let u0 = named(
            check,
            ModeSection::new(surface.clone(), 0, named(check, u.coeffs_or_zero(0))?),
        )?;
        let u1 = named(
            check,
            ModeSection::new(surface.clone(), 1, named(check, u.coeffs_or_zero(1))?),
        )?;
        let recon = named(check, problem.reconstruct(&u0, &u1, kmax))?;

        let mut diff = recon.stack.clone();
        named(check, diff.add_scaled_stack(&u, Complex64::new(-1.0, 0.0)))?;
        let err = diff.total_l2() / u.total_l2().max(f64::EPSILON);
        let row = CheckRow::residual(check, err, cfg.checks.tolerance);
        table.push(vec![
            Cell::Text(label.to_string()),
            Cell::Float(err),
            Cell::Float(recon.residual),
            Cell::Bool(row.passed),
        ]);
        checks.push(row);
    }

    // No data reconstructs to the zero stack, exactly.
    let phi_sec = named("zero-data-exact", ModeSection::constant(surface.clone(), 0, Complex64::default()))?;
    let problem = named(
        "zero-data-exact",
        TransportProblem::new(surface.clone(), phi_sec, ModeStack::new(surface.clone()), band),
    )?;
    let z0 = named("zero-data-exact", ModeSection::zero(surface.clone(), 0))?;
    let z1 = named("zero-data-exact", ModeSection::zero(surface.clone(), 1))?;
    let recon = named("zero-data-exact", problem.reconstruct(&z0, &z1, kmax))?;
    let norm = recon.stack.total_l2();
    let row = CheckRow::flag("zero-data-exact", norm == 0.0, norm);
    table.push(vec![
        Cell::Text("zero-data".into()),
        Cell::Float(norm),
        Cell::Float(recon.residual),
        Cell::Bool(row.passed),
    ]);
    checks.push(row);

    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn stability(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let samples = cfg.checks.samples;
    let problem = named(
        "ratio-finite",
        TransportProblem::homogeneous(surface.clone(), Complex64::default(), cfg.checks.kspan + 1),
    )?;
    let table_data = named(
        "ratio-finite",
        stability_sample(&problem, cfg.checks.s, cfg.checks.kspan, samples, cfg.seed),
    )?;

    let mut table = Table::new("stability", &["index", "ratio", "zoll_ratio", "running_max"]);
    for row in &table_data.samples {
        table.push(vec![
            Cell::Int(row.index as i64),
            Cell::Float(row.ratio),
            Cell::Float(row.zoll_ratio),
            Cell::Float(row.running_max),
        ]);
    }

    let max = table_data.max_ratio();
    let half = table_data
        .max_after(samples / 2)
        .unwrap_or(f64::NAN);
    let variation = (max - half).abs() / half.abs().max(f64::EPSILON);
    let checks = vec![
        CheckRow::flag("ratio-finite", max.is_finite() && max > 0.0, max),
        CheckRow::residual("ratio-stable", variation, 0.10),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn trace(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let mut table = Table::new("trace", &["p", "p_modes", "p_radial", "pass"]);
    let mut all_ok = true;
    let mut worst_dev = 0.0f64;
    let terms = 128i32;
    for p in 0..=3i32 {
        let mut stack = ModeStack::new(surface.clone());
        for k in 0..=terms {
            let c = ((k * k + 1) as f64).sqrt().powi(p);
            named(
                "growth-window",
                stack.insert(
                    named(
                        "growth-window",
                        ModeSection::constant(surface.clone(), k, Complex64::new(c, 0.0)),
                    )?,
                ),
            )?;
        }
        let series = named("growth-window", TwistorSeries::extend(&stack, 0))?;
        let radii = default_radii(series.len());
        let growth = named("growth-window", trace_and_growth(&series, &radii, 0))?;
        let window_ok = growth.p_radial >= p as f64 - 0.5 && growth.p_radial <= p as f64 + 1.5;
        all_ok &= window_ok && growth.pass;
        worst_dev = worst_dev.max((growth.p_radial - p as f64).abs());
        table.push(vec![
            Cell::Int(p as i64),
            Cell::Float(growth.p_modes),
            Cell::Float(growth.p_radial),
            Cell::Bool(window_ok && growth.pass),
        ]);
    }

    // Boundary restriction of the power-series extension is bit-exact.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw = named(
        "round-trip-exact",
        ModeStack::random(surface.clone(), 0, cfg.checks.kspan.max(4), &mut rng),
    )?;
    let series = named("round-trip-exact", TwistorSeries::extend(&raw, 0))?;
    let back = series.trace();
    let mut exact = true;
    for (&k, sec) in raw.iter() {
        let round = named("round-trip-exact", back.coeffs_or_zero(k))?;
        exact &= sec.coeffs() == round.as_slice();
    }

    let checks = vec![
        CheckRow::flag("growth-window", all_ok, worst_dev),
        CheckRow::flag("round-trip-exact", exact, if exact { 0.0 } else { 1.0 }),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

/// Random flow-invariant boundary series: constant sections with decaying
/// random coefficients, which the generator annihilates degree by degree.
fn random_invariant_series(
    surface: &Arc<Surface>,
    band: i32,
    rng: &mut ChaCha8Rng,
) -> gtl_core::Result<TwistorSeries> {
    let mut stack = ModeStack::new(surface.clone());
    for k in 0..=band {
        let amp = 0.8f64.powi(k);
        let c = Complex64::new(
            amp * rng.gen_range(-1.0..1.0),
            amp * rng.gen_range(-1.0..1.0),
        );
        stack.insert(ModeSection::constant(surface.clone(), k, c)?)?;
    }
    TwistorSeries::extend(&stack, 0)
}

fn series_rel_diff(a: &TwistorSeries, b: &TwistorSeries) -> gtl_core::Result<f64> {
    let mut diff = a.trace();
    let bt = b.trace();
    diff.add_scaled_stack(&bt, Complex64::new(-1.0, 0.0))?;
    Ok(diff.total_l2() / bt.total_l2().max(f64::EPSILON))
}

fn algebra(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let band = cfg.checks.band;
    let pairs = 50usize;

    let mut table = Table::new("algebra", &["pair", "product_residual", "certified", "pass"]);
    let mut worst = 0.0f64;
    let mut first_three = Vec::new();
    for pair in 0..pairs {
        let a = named(
            "product-holomorphy",
            random_invariant_series(&surface, band, &mut rng),
        )?;
        let b = named(
            "product-holomorphy",
            random_invariant_series(&surface, band, &mut rng),
        )?;
        if first_three.len() < 3 {
            first_three.push(a.clone());
        }
        let product = named("product-holomorphy", a.product(&b))?;
        let report = named("product-holomorphy", product.holomorphy_residual())?;
        worst = worst.max(report.max_residual);
        let pass = report.max_residual < cfg.checks.tolerance;
        table.push(vec![
            Cell::Int(pair as i64),
            Cell::Float(report.max_residual),
            Cell::Bool(report.certified),
            Cell::Bool(pass),
        ]);
    }

    // Unit and associativity laws at truncation; products of constants only
    // accumulate rounding, so the thresholds sit at the noise floor.
    let unit = named("unit-law", TwistorSeries::unit(surface.clone()))?;
    let h = &first_three[0];
    let uh = named("unit-law", unit.product(h))?;
    let unit_dev = named("unit-law", series_rel_diff(&uh, h))?;

    let (a, b, c) = (&first_three[0], &first_three[1], &first_three[2]);
    let ab_c = named(
        "associativity",
        named("associativity", a.product(b))?.product(c),
    )?;
    let a_bc = named(
        "associativity",
        a.product(&named("associativity", b.product(c))?),
    )?;
    let assoc_dev = named("associativity", series_rel_diff(&ab_c, &a_bc))?;

    let checks = vec![
        CheckRow::residual("product-holomorphy", worst, cfg.checks.tolerance),
        CheckRow::residual("unit-law", unit_dev, 1e-12),
        CheckRow::residual("associativity", assoc_dev, 1e-12),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn dolbeault(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_cap = 8.0;

    let trim_tuple = |t: &DolbeaultTuple| -> gtl_core::Result<DolbeaultTuple> {
        let mut entries = Vec::new();
        for field in t.entries() {
            let mut out = CoefficientField::new(surface.clone(), field.weight());
            for (&(a, b), sec) in field.iter() {
                let mut sec = sec.clone();
                trim_torus_section(&surface, &mut sec, n_cap);
                out.set_term(a, b, sec)?;
            }
            entries.push(out);
        }
        DolbeaultTuple::new(t.p(), t.q(), entries)
    };

    let mut table = Table::new("dolbeault", &["p", "tuple_norm", "dd_norm", "pass"]);
    let mut worst = 0.0f64;
    for p in [0u8, 1, 2] {
        let raw = named(
            "d-squared-zero",
            DolbeaultTuple::random(surface.clone(), p, 0, 4, 4, &mut rng),
        )?;
        let tuple = named("d-squared-zero", trim_tuple(&raw))?;
        let dd = named("d-squared-zero", named("d-squared-zero", tuple.d())?.d())?;
        let rel = dd.norm() / (1.0 + tuple.norm());
        worst = worst.max(rel);
        table.push(vec![
            Cell::Int(p as i64),
            Cell::Float(tuple.norm()),
            Cell::Float(dd.norm()),
            Cell::Bool(rel <= 1e-12),
        ]);
    }

    // The fibre antiderivative splits the fibre derivative slot-for-slot.
    let field = named(
        "solver-exact",
        CoefficientField::random(surface.clone(), 0, 4, 4, &mut rng),
    )?;
    let solved = dbar_omega_solve(&field);
    let back = solved.dbar_fiber();
    let mut exact = true;
    for (&(a, b), sec) in field.iter() {
        match back.term(a, b) {
            Some(round) => exact &= round.coeffs() == sec.coeffs(),
            None => exact &= sec.norm() == 0.0,
        }
    }

    let checks = vec![
        CheckRow::residual("d-squared-zero", worst, 1e-12),
        CheckRow::flag("solver-exact", exact, if exact { 0.0 } else { 1.0 }),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn bundle(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let surface = surface_of(cfg)?;
    let tau = std::f64::consts::TAU;

    // The plane-wave gauge psi = exp(2 pi i x1).
    let qs = surface
        .torus_frequencies()
        .ok_or_else(|| RunError::config("bundle suite requires a torus backend"))?;
    let slot = qs
        .iter()
        .position(|q| (q[0] - tau).abs() < 1e-9 && q[1].abs() < 1e-9)
        .ok_or_else(|| RunError::config("surface band cannot represent the unit wave"))?;
    let mut coeffs = named("gauge-residual", surface.zero_coeffs(0))?;
    coeffs[slot] = Complex64::new(1.0, 0.0);
    let psi = named("gauge-residual", ModeSection::new(surface.clone(), 0, coeffs))?;

    let connection = named("gauge-residual", gauge_pullback(&psi))?;
    let psi_inv = named(
        "gauge-residual",
        ModeSection::new(
            surface.clone(),
            0,
            named("gauge-residual", surface.reciprocal(psi.coeffs()))?,
        ),
    )?;
    let zero = ModeStack::new(surface.clone());
    let residual = named("gauge-residual", gauge_residual(&connection, &psi_inv, &zero))?;

    let obs = named("class-reduces", bundle_obstruction(&connection))?;
    let reduced = obs.period_reduced.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let class_ok = obs.class_vanishes == Some(true);

    // A connection whose degree-0 part has nonzero mean must be flagged.
    let mut flagged_stack = connection.clone();
    named(
        "nonzero-mean-flagged",
        flagged_stack.insert(named(
            "nonzero-mean-flagged",
            ModeSection::constant(surface.clone(), 0, Complex64::new(0.3, 0.0)),
        )?),
    )?;
    let flagged = named("nonzero-mean-flagged", bundle_obstruction(&flagged_stack))?;

    let mut table = Table::new("bundle", &["quantity", "re", "im"]);
    table.push(vec![
        Cell::Text("gauge_residual".into()),
        Cell::Float(residual),
        Cell::Float(0.0),
    ]);
    table.push(vec![
        Cell::Text("period".into()),
        Cell::Float(obs.period.re),
        Cell::Float(obs.period.im),
    ]);
    table.push(vec![
        Cell::Text("period_reduced".into()),
        Cell::Float(reduced.re),
        Cell::Float(reduced.im),
    ]);
    table.push(vec![
        Cell::Text("integral".into()),
        Cell::Float(obs.integral.re),
        Cell::Float(obs.integral.im),
    ]);
    table.push(vec![
        Cell::Text("integral_shifted_mean".into()),
        Cell::Float(flagged.integral.re),
        Cell::Float(flagged.integral.im),
    ]);

    let checks = vec![
        CheckRow::residual("gauge-residual", residual, 1e-12),
        CheckRow::flag("class-reduces", class_ok, reduced.norm()),
        CheckRow::flag("integral-vanishes", obs.integral_vanishes, obs.integral.norm()),
        CheckRow::flag(
            "nonzero-mean-flagged",
            !flagged.integral_vanishes,
            flagged.integral.norm(),
        ),
    ];
    let label = display_label(cfg);
    Ok((vec![table], checks, Some(label)))
}

fn cone_suite(cfg: &RunConfig) -> Result<SuiteOutput, RunError> {
    let profile = cfg.cone.profile.to_profile();
    let seed = [cfg.cone.seed_x, cfg.cone.seed_y];
    let t_end = cfg.cone.t_end;

    let traj = named(
        "trajectory-finite",
        cone::integrate_projective(&profile, seed, t_end),
    )?;
    let mut trajectory = Table::new("trajectory", &["t", "x", "y"]);
    let mut finite = true;
    for i in 0..traj.len() {
        finite &= traj.ts[i].is_finite() && traj.xs[i].is_finite() && traj.ys[i].is_finite();
        trajectory.push(vec![
            Cell::Float(traj.ts[i]),
            Cell::Float(traj.xs[i]),
            Cell::Float(traj.ys[i]),
        ]);
    }
    let mut checks = vec![CheckRow::flag("trajectory-finite", finite, traj.len() as f64)];

    let report = named("conjugate-count", cone::crossing_analysis(&traj))?;
    let mut crossings = Table::new("crossings", &["t", "transversal"]);
    for c in &report.crossings {
        crossings.push(vec![Cell::Float(c.t), Cell::Float(c.transversal)]);
    }
    let mut conjugates = Table::new("conjugates", &["index", "t"]);
    for (i, t) in report.conjugate_times.iter().enumerate() {
        conjugates.push(vec![Cell::Int(i as i64), Cell::Float(*t)]);
    }

    // Closed forms exist for constant curvature seeded on the axis.
    let constant = match profile {
        CurvatureProfile::Constant(c) => Some(c),
        _ => None,
    };
    let on_axis = seed[0] == 0.0 && seed[1] == 1.0;
    if let (Some(c), true) = (constant, on_axis) {
        let mut dev = 0.0f64;
        for i in 0..traj.len() {
            let t = traj.ts[i];
            let (wx, wy) = if c > 0.0 {
                let s = c.sqrt();
                (-(s * t).sin() / s, (s * t).cos())
            } else if c == 0.0 {
                (-t, 1.0)
            } else {
                let s = (-c).sqrt();
                // direction only; tanh keeps the overflow away
                (-(s * t).tanh(), 1.0)
            };
            let scale = wx.hypot(wy);
            dev = dev.max((traj.xs[i] - wx / scale).hypot(traj.ys[i] - wy / scale));
        }
        checks.push(CheckRow::residual("closed-form", dev, 1e-8));

        if c > 0.0 {
            let expected = (t_end * c.sqrt() / std::f64::consts::PI).floor() as i64;
            let got = report.conjugate_times.len() as i64;
            checks.push(CheckRow::flag("conjugate-count", got == expected, got as f64));
        }
    }

    // Scalar slope equation along the flow, away from axis crossings.
    let candidates: Vec<f64> = [0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|f| f * t_end)
        .filter(|t| {
            let i = traj
                .ts
                .iter()
                .position(|s| s >= t)
                .unwrap_or(traj.len() - 1);
            traj.xs[i].abs() > 0.2 && *t + 0.01 < t_end
        })
        .collect();
    if !candidates.is_empty() {
        let check = named(
            "riccati-consistency",
            cone::riccati_consistency(&profile, seed, &candidates),
        )?;
        checks.push(CheckRow::residual(
            "riccati-consistency",
            check.max_residual,
            1e-7,
        ));
    }

    // Asymptotic slopes; positive constant curvature is expected to refuse.
    let mut riccati = Table::new(
        "riccati",
        &["horizon", "r_unstable", "r_stable", "gap", "separated"],
    );
    match cone::riccati_limits(&profile, cfg.cone.horizon) {
        Ok(limits) => {
            for i in 0..3 {
                riccati.push(vec![
                    Cell::Float(limits.horizons[i]),
                    Cell::Float(limits.unstable_sequence[i]),
                    Cell::Float(limits.stable_sequence[i]),
                    Cell::Float((limits.unstable_sequence[i] - limits.stable_sequence[i]).abs()),
                    Cell::Bool(limits.separated),
                ]);
            }
            riccati.push(vec![
                Cell::Float(f64::INFINITY),
                Cell::Float(limits.r_unstable),
                Cell::Float(limits.r_stable),
                Cell::Float(limits.gap),
                Cell::Bool(limits.separated),
            ]);
            let passed = match constant {
                Some(c) if c < 0.0 => (limits.gap - 2.0 * (-c).sqrt()).abs() < 1e-6,
                Some(c) if c == 0.0 => !limits.separated,
                _ => true,
            };
            checks.push(CheckRow::flag("riccati-limits", passed, limits.gap));
        }
        Err(gtl_core::GtlError::NoConvergence { d1, d2 }) => {
            let expected = matches!(constant, Some(c) if c > 0.0);
            let _ = d1;
            checks.push(CheckRow::flag("riccati-limits", expected, d2));
        }
        Err(e) => {
            return Err(RunError::run(format!("check `riccati-limits` failed to run: {e}")));
        }
    }

    Ok((
        vec![trajectory, crossings, conjugates, riccati],
        checks,
        None,
    ))
}

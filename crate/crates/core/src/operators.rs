//! Frame operators on mode stacks and their structure checks.
//!
//! The geodesic frame on SM splits against the vertical Fourier modes: the
//! vertical field V is multiplication by `ik` on degree k, and the geodesic
//! and horizontal fields decompose as `X = eta+ + eta-`, `H = i(eta+ - eta-)`
//! into the degree-raising/lowering ladder operators realized by each
//! backend.
//!
//! This module applies those operators to stacks, measures the frame's
//! structure identities (commutators, the energy identity relating the two
//! ladder directions through curvature, the holomorphic-projection
//! commutator), and computes kernels and least-squares inverses of the
//! ladder operators from their finite-band matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};
use crate::geometry::{Surface, SurfaceKind};
use crate::modes::{szego, ModeSection, ModeStack};

/// Relative singular-value threshold below which a direction counts as kernel.
pub const KERNEL_TOL: f64 = 1e-8;

/// Required ratio between the smallest retained singular value and the cut.
pub const KERNEL_GAP: f64 = 10.0;

/// The two ladder directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderOp {
    /// Degree k -> k+1.
    Raise,
    /// Degree k -> k-1.
    Lower,
}

impl LadderOp {
    pub fn shift(self) -> i32 {
        match self {
            LadderOp::Raise => 1,
            LadderOp::Lower => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LadderOp::Raise => "eta_plus",
            LadderOp::Lower => "eta_minus",
        }
    }
}

/// A first-order frame operator acting on mode stacks.
#[derive(Clone)]
pub enum GeometricOp {
    /// Geodesic vector field: raise + lower.
    X,
    /// Horizontal field: i (raise - lower).
    H,
    /// Vertical field: ik on degree k.
    V,
    EtaPlus,
    EtaMinus,
    /// Multiplication by a degree-0 section (a function on the base).
    MultByPhi(ModeSection),
}

impl GeometricOp {
    /// Multiplication operator; the factor must be a degree-0 section.
    pub fn mult_by(phi: ModeSection) -> Result<Self> {
        if phi.k() != 0 {
            return Err(GtlError::DegreeOutOfRange { k: phi.k(), max: 0 });
        }
        Ok(GeometricOp::MultByPhi(phi))
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeometricOp::X => "X",
            GeometricOp::H => "H",
            GeometricOp::V => "V",
            GeometricOp::EtaPlus => "eta_plus",
            GeometricOp::EtaMinus => "eta_minus",
            GeometricOp::MultByPhi(_) => "mult_phi",
        }
    }
}

fn raise(section: &ModeSection) -> Result<ModeSection> {
    let s = section.surface();
    let out = s.eta_plus(section.k(), section.coeffs())?;
    ModeSection::new(s.clone(), section.k() + 1, out)
}

fn lower(section: &ModeSection) -> Result<ModeSection> {
    let s = section.surface();
    let out = s.eta_minus(section.k(), section.coeffs())?;
    ModeSection::new(s.clone(), section.k() - 1, out)
}

/// Apply a frame operator to a single mode; the image can span up to two
/// degrees.
pub fn apply_to_section(op: &GeometricOp, section: &ModeSection) -> Result<Vec<ModeSection>> {
    let i = Complex64::new(0.0, 1.0);
    match op {
        GeometricOp::X => Ok(vec![raise(section)?, lower(section)?]),
        GeometricOp::H => {
            let mut up = raise(section)?;
            up.scale(i);
            let mut down = lower(section)?;
            down.scale(-i);
            Ok(vec![up, down])
        }
        GeometricOp::V => {
            let mut out = section.clone();
            out.scale(i * section.k() as f64);
            Ok(vec![out])
        }
        GeometricOp::EtaPlus => Ok(vec![raise(section)?]),
        GeometricOp::EtaMinus => Ok(vec![lower(section)?]),
        GeometricOp::MultByPhi(phi) => {
            let s = section.surface();
            s.ensure_same(phi.surface())?;
            let out = s.multiply(0, phi.coeffs(), section.k(), section.coeffs())?;
            ModeSection::new(s.clone(), section.k(), out).map(|m| vec![m])
        }
    }
}

/// Apply a frame operator to a whole stack, accumulating per degree.
pub fn apply(op: &GeometricOp, stack: &ModeStack) -> Result<ModeStack> {
    let mut out = ModeStack::new(stack.surface().clone());
    for (_, section) in stack.iter() {
        for image in apply_to_section(op, section)? {
            out.accumulate(image)?;
        }
    }
    Ok(out)
}

/// Relative residuals of the frame structure identities measured on random
/// band-limited stacks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// identity label -> worst relative residual across trials
    pub residuals: Vec<(String, f64)>,
    pub trials: usize,
}

impl CommutatorReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// `[a, b] stack = a(b(stack)) - b(a(stack))`.
fn commutator(a: &GeometricOp, b: &GeometricOp, stack: &ModeStack) -> Result<ModeStack> {
    let mut ab = apply(a, &apply(b, stack)?)?;
    let ba = apply(b, &apply(a, stack)?)?;
    ab.add_scaled_stack(&ba, Complex64::new(-1.0, 0.0))?;
    Ok(ab)
}

/// Random stack on degrees |k| <= kspan whose spectral support leaves room
/// for two operator applications and one curvature multiplication before the
/// backend's band guard would trip.
pub fn random_headroom_stack<R: rand::Rng>(
    surface: &Arc<Surface>,
    kspan: i32,
    rng: &mut R,
) -> Result<ModeStack> {
    let stack = ModeStack::random(surface.clone(), -kspan, kspan, rng)?;
    match surface.kind() {
        SurfaceKind::RoundSphere => Ok(stack),
        SurfaceKind::FlatTorus | SurfaceKind::ConformalTorus => {
            let qs = surface.torus_frequencies().unwrap();
            let qmax = qs.iter().map(|q| q[0].hypot(q[1])).fold(0.0, f64::max);
            let cut = qmax / 3.0;
            let mut trimmed = ModeStack::new(surface.clone());
            for (&k, sec) in stack.iter() {
                let mut coeffs = sec.coeffs().to_vec();
                for (c, q) in coeffs.iter_mut().zip(&qs) {
                    if q[0].hypot(q[1]) > cut {
                        *c = Complex64::default();
                    }
                }
                trimmed.insert(ModeSection::new(surface.clone(), k, coeffs)?)?;
            }
            Ok(trimmed)
        }
    }
}

/// Check the six structure identities of the frame on `trials` random stacks
/// with degrees |k| <= kspan. Residuals are relative to the stack norm.
///
/// Identities measured (K is the Gauss curvature):
///   [V, X] = H,   [H, V] = X,   [X, H] = K V,
///   [-iV, eta+] = eta+,   [-iV, eta-] = -eta-,   [eta+, eta-] = i K V / 2.
pub fn commutator_check(
    surface: &Arc<Surface>,
    kspan: i32,
    trials: usize,
    seed: u64,
) -> Result<CommutatorReport> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let curvature = ModeSection::new(surface.clone(), 0, surface.curvature_coeffs())?;
    let mult_k = GeometricOp::MultByPhi(curvature);
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let minus_one = -one;

    let mut worst = [0.0_f64; 6];
    for _ in 0..trials {
        let stack = random_headroom_stack(surface, kspan, &mut rng)?;
        let norm = stack.total_l2();

        // [V, X] - H
        let mut r = commutator(&GeometricOp::V, &GeometricOp::X, &stack)?;
        r.add_scaled_stack(&apply(&GeometricOp::H, &stack)?, minus_one)?;
        worst[0] = worst[0].max(r.total_l2() / norm);

        // [H, V] - X
        let mut r = commutator(&GeometricOp::H, &GeometricOp::V, &stack)?;
        r.add_scaled_stack(&apply(&GeometricOp::X, &stack)?, minus_one)?;
        worst[1] = worst[1].max(r.total_l2() / norm);

        // [X, H] - K V
        let mut r = commutator(&GeometricOp::X, &GeometricOp::H, &stack)?;
        let kv = apply(&mult_k, &apply(&GeometricOp::V, &stack)?)?;
        r.add_scaled_stack(&kv, minus_one)?;
        worst[2] = worst[2].max(r.total_l2() / norm);

        // [-iV, eta+] - eta+
        let mut r = commutator(&GeometricOp::V, &GeometricOp::EtaPlus, &stack)?;
        r.scale(-i);
        r.add_scaled_stack(&apply(&GeometricOp::EtaPlus, &stack)?, minus_one)?;
        worst[3] = worst[3].max(r.total_l2() / norm);

        // [-iV, eta-] + eta-
        let mut r = commutator(&GeometricOp::V, &GeometricOp::EtaMinus, &stack)?;
        r.scale(-i);
        r.add_scaled_stack(&apply(&GeometricOp::EtaMinus, &stack)?, one)?;
        worst[4] = worst[4].max(r.total_l2() / norm);

        // [eta+, eta-] - i K V / 2
        let mut r = commutator(&GeometricOp::EtaPlus, &GeometricOp::EtaMinus, &stack)?;
        let mut kv = apply(&mult_k, &apply(&GeometricOp::V, &stack)?)?;
        kv.scale(i * 0.5);
        r.add_scaled_stack(&kv, minus_one)?;
        worst[5] = worst[5].max(r.total_l2() / norm);
    }

    let labels = [
        "[V,X]-H",
        "[H,V]-X",
        "[X,H]-KV",
        "[-iV,eta+]-eta+",
        "[-iV,eta-]+eta-",
        "[eta+,eta-]-iKV/2",
    ];
    Ok(CommutatorReport {
        residuals: labels.iter().zip(worst).map(|(l, w)| (l.to_string(), w)).collect(),
        trials,
    })
}

/// Both sides of the ladder energy identity
/// `||eta+ u||^2 = ||eta- u||^2 - (k/2) <K u, u>` and its relative residual.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Evaluate the energy identity on one degree-k section.
pub fn pestov_check(u: &ModeSection) -> Result<EnergyIdentity> {
    let s = u.surface();
    let k = u.k();
    let up = s.eta_plus(k, u.coeffs())?;
    let down = s.eta_minus(k, u.coeffs())?;
    let ku = s.multiply(0, &s.curvature_coeffs(), k, u.coeffs())?;
    let lhs = s.inner(k + 1, &up, &up)?.re;
    let curv_term = s.inner(k, &ku, u.coeffs())?.re;
    let rhs = s.inner(k - 1, &down, &down)?.re - 0.5 * k as f64 * curv_term;
    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + f64::EPSILON);
    Ok(EnergyIdentity { lhs, rhs, residual })
}

/// Residual of the holomorphic-projection commutator
/// `[S, X] f = eta+ f_{-1} - eta- f_0` relative to the stack norm.
pub fn szego_commutator_check(stack: &ModeStack) -> Result<f64> {
    let surface = stack.surface().clone();
    let (sxf, _) = szego(&apply(&GeometricOp::X, stack)?);
    let (sf, _) = szego(stack);
    let xsf = apply(&GeometricOp::X, &sf)?;
    let mut lhs = sxf;
    lhs.add_scaled_stack(&xsf, Complex64::new(-1.0, 0.0))?;

    let f_m1 = ModeSection::new(surface.clone(), -1, stack.coeffs_or_zero(-1)?)?;
    let f_0 = ModeSection::new(surface.clone(), 0, stack.coeffs_or_zero(0)?)?;
    let mut rhs = ModeStack::new(surface);
    rhs.accumulate(raise(&f_m1)?)?;
    let mut low = lower(&f_0)?;
    low.scale(Complex64::new(-1.0, 0.0));
    rhs.accumulate(low)?;

    lhs.add_scaled_stack(&rhs, Complex64::new(-1.0, 0.0))?;
    Ok(lhs.total_l2() / stack.total_l2().max(f64::EPSILON))
}

/// Closed-form kernel dimension of a ladder operator on degree-k sections of
/// a closed oriented surface of the given genus.
pub fn predicted_kernel_dim(genus: usize, op: LadderOp, k: i32) -> usize {
    // the two directions mirror each other under k -> -k
    let k = match op {
        LadderOp::Lower => k,
        LadderOp::Raise => -k,
    };
    match genus {
        0 => (1 - 2 * k).max(0) as usize,
        1 => 1,
        g => {
            if k >= 2 {
                (2 * k - 1) as usize * (g - 1)
            } else if k == 1 {
                g
            } else if k == 0 {
                1
            } else {
                0
            }
        }
    }
}

/// The finite-band matrix of a ladder operator at degree k, as columns.
fn assemble_columns(
    surface: &Arc<Surface>,
    op: LadderOp,
    k: i32,
) -> Result<(Vec<Vec<Complex64>>, usize)> {
    let dom = surface.section_len(k)?;
    let target = surface.section_len(k + op.shift())?;
    let mut cols = Vec::with_capacity(dom);
    let mut delta = vec![Complex64::default(); dom];
    for s in 0..dom {
        delta[s] = Complex64::new(1.0, 0.0);
        cols.push(surface.eta_projected(k, &delta, op == LadderOp::Raise)?);
        delta[s] = Complex64::default();
    }
    Ok((cols, target))
}

/// Singular values of a monomial matrix: at most one significant entry per
/// column, all in distinct rows. Returns None when the matrix is not of that
/// shape and a dense decomposition is needed.
fn monomial_singular_values(cols: &[Vec<Complex64>], target_len: usize) -> Option<Vec<f64>> {
    let col_max = cols
        .iter()
        .flat_map(|c| c.iter())
        .map(|v| v.norm())
        .fold(0.0_f64, f64::max);
    let eps = 1e-14 * col_max.max(1.0);
    let mut row_used = vec![false; target_len];
    let mut sigmas = Vec::with_capacity(cols.len());
    for col in cols {
        let mut found: Option<(usize, f64)> = None;
        for (r, v) in col.iter().enumerate() {
            if v.norm() > eps {
                if found.is_some() {
                    return None;
                }
                found = Some((r, v.norm()));
            }
        }
        match found {
            Some((r, mag)) => {
                if row_used[r] {
                    return None;
                }
                row_used[r] = true;
                sigmas.push(mag);
            }
            None => sigmas.push(0.0),
        }
    }
    Some(sigmas)
}

fn columns_to_matrix(cols: &[Vec<Complex64>], target_len: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(target_len, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

/// Numeric kernel of a ladder operator at degree k, with the closed-form
/// prediction for the backend's genus.
#[derive(Clone)]
pub struct KernelReport {
    pub op: LadderOp,
    pub k: i32,
    pub dim_numeric: usize,
    pub dim_formula: usize,
    /// smallest retained singular value over the kernel cut (>= KERNEL_GAP)
    pub gap: f64,
    pub sigma_max: f64,
    pub basis: Vec<ModeSection>,
}

/// Measure the kernel of a ladder operator from its finite-band matrix.
///
/// Singular values below `KERNEL_TOL * sigma_max` count as kernel; the
/// smallest retained value must clear the cut by `KERNEL_GAP`, otherwise the
/// dimension would be tolerance-dependent and the report refuses.
pub fn kernel_report(surface: &Arc<Surface>, op: LadderOp, k: i32) -> Result<KernelReport> {
    let (cols, target_len) = assemble_columns(surface, op, k)?;
    let dom = cols.len();

    let (sigmas, basis) = if let Some(sigmas) = monomial_singular_values(&cols, target_len) {
        // kernel vectors are the annihilated coordinate directions
        let smax = sigmas.iter().cloned().fold(0.0, f64::max);
        let cut = KERNEL_TOL * smax;
        let mut basis = Vec::new();
        for (s, sigma) in sigmas.iter().enumerate() {
            if *sigma <= cut {
                let mut v = vec![Complex64::default(); dom];
                v[s] = Complex64::new(1.0, 0.0);
                basis.push(ModeSection::new(surface.clone(), k, v)?);
            }
        }
        (sigmas, basis)
    } else {
        let svd = columns_to_matrix(&cols, target_len).svd(false, true);
        let sigmas: Vec<f64> = svd.singular_values.iter().cloned().collect();
        let smax = sigmas.iter().cloned().fold(0.0, f64::max);
        let cut = KERNEL_TOL * smax;
        let v_t = svd.v_t.expect("right singular vectors were requested");
        let mut basis = Vec::new();
        for (i, sigma) in sigmas.iter().enumerate() {
            if *sigma <= cut {
                let v: Vec<Complex64> = (0..dom).map(|j| v_t[(i, j)].conj()).collect();
                basis.push(ModeSection::new(surface.clone(), k, v)?);
            }
        }
        (sigmas, basis)
    };

    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let cut = KERNEL_TOL * sigma_max;
    let dim_numeric = sigmas.iter().filter(|s| **s <= cut).count();
    let above = sigmas.iter().cloned().filter(|s| *s > cut).fold(f64::INFINITY, f64::min);
    let gap = if above.is_finite() { above / cut.max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    if gap < KERNEL_GAP {
        return Err(GtlError::TruncationTooTight { above, cut });
    }
    Ok(KernelReport {
        op,
        k,
        dim_numeric,
        dim_formula: predicted_kernel_dim(surface.genus(), op, k),
        gap,
        sigma_max,
        basis,
    })
}

/// How a least-squares ladder solve terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Operator injective at this degree; solution unique.
    Unique,
    /// Operator has a kernel; the minimum-norm solution is returned.
    MinimumNorm,
}

/// Least-squares solution of `op u = rhs`.
pub struct EllipticSolve {
    pub solution: ModeSection,
    /// `||op solution - rhs||`
    pub residual: f64,
    pub status: SolveStatus,
    pub kernel_dim: usize,
}

/// Solve `op u = rhs` in the least-squares sense; the domain degree is
/// inferred from the right-hand side (rhs lives one ladder step from u).
pub fn solve_elliptic(op: LadderOp, rhs: &ModeSection) -> Result<EllipticSolve> {
    let surface = rhs.surface().clone();
    let k = rhs.k() - op.shift();
    let (cols, target_len) = assemble_columns(&surface, op, k)?;
    let dom = cols.len();

    let (solution, kernel_dim) = if let Some(sigmas) = monomial_singular_values(&cols, target_len)
    {
        let smax = sigmas.iter().cloned().fold(0.0, f64::max);
        let cut = KERNEL_TOL * smax;
        let mut sol = vec![Complex64::default(); dom];
        let mut kdim = 0;
        for (s, col) in cols.iter().enumerate() {
            if sigmas[s] <= cut {
                kdim += 1;
                continue;
            }
            let (r, v) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            sol[s] = rhs.coeffs()[r] / v;
        }
        (sol, kdim)
    } else {
        let svd = columns_to_matrix(&cols, target_len).svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cut = KERNEL_TOL * smax;
        let kdim = svd.singular_values.iter().filter(|s| **s <= cut).count();
        let b = DVector::<Complex64>::from_iterator(target_len, rhs.coeffs().iter().cloned());
        let sol = svd.solve(&b, cut).expect("singular vectors were requested");
        (sol.iter().cloned().collect(), kdim)
    };

    let solution = ModeSection::new(surface.clone(), k, solution)?;
    let mut diff = surface.eta_projected(k, solution.coeffs(), op == LadderOp::Raise)?;
    for (d, r) in diff.iter_mut().zip(rhs.coeffs()) {
        *d -= r;
    }
    let residual = surface.norm(rhs.k(), &diff)?;
    Ok(EllipticSolve {
        solution,
        residual,
        status: if kernel_dim == 0 { SolveStatus::Unique } else { SolveStatus::MinimumNorm },
        kernel_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, LambdaWave, SurfaceConfig};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conformal_config() -> SurfaceConfig {
        SurfaceConfig::conformal_torus(
            32,
            vec![
                LambdaWave { n: [1, 0], re: 0.05, im: 0.0 },
                LambdaWave { n: [-1, 0], re: 0.05, im: 0.0 },
            ],
        )
    }

    fn surfaces() -> Vec<Arc<Surface>> {
        vec![
            build_surface(&SurfaceConfig::unit_flat_torus(16)).unwrap(),
            build_surface(&SurfaceConfig::round_sphere(10)).unwrap(),
            build_surface(&conformal_config()).unwrap(),
        ]
    }

    #[test]
    fn vertical_field_is_ik() {
        let s = build_surface(&SurfaceConfig::unit_flat_torus(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = ModeSection::random(s, 3, &mut rng).unwrap();
        let out = apply_to_section(&GeometricOp::V, &u).unwrap();
        assert_eq!(out.len(), 1);
        let mut expect = u.clone();
        expect.scale(Complex64::new(0.0, 3.0));
        let mut diff = out[0].clone();
        diff.add_scaled(&expect, Complex64::new(-1.0, 0.0)).unwrap();
        assert_eq!(diff.norm(), 0.0);
    }

    #[test]
    fn x_and_h_are_ladder_combinations() {
        for s in surfaces() {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let stack = random_headroom_stack(&s, 1, &mut rng).unwrap();

            let x = apply(&GeometricOp::X, &stack).unwrap();
            let mut manual = apply(&GeometricOp::EtaPlus, &stack).unwrap();
            manual
                .add_scaled_stack(
                    &apply(&GeometricOp::EtaMinus, &stack).unwrap(),
                    Complex64::new(1.0, 0.0),
                )
                .unwrap();
            let mut diff = x;
            diff.add_scaled_stack(&manual, Complex64::new(-1.0, 0.0)).unwrap();
            assert!(diff.total_l2() < 1e-12 * stack.total_l2());

            let h = apply(&GeometricOp::H, &stack).unwrap();
            let mut manual = apply(&GeometricOp::EtaPlus, &stack).unwrap();
            manual.scale(Complex64::new(0.0, 1.0));
            let mut low = apply(&GeometricOp::EtaMinus, &stack).unwrap();
            low.scale(Complex64::new(0.0, -1.0));
            manual.add_scaled_stack(&low, Complex64::new(1.0, 0.0)).unwrap();
            let mut diff = h;
            diff.add_scaled_stack(&manual, Complex64::new(-1.0, 0.0)).unwrap();
            assert!(diff.total_l2() < 1e-12 * stack.total_l2());
        }
    }

    #[test]
    fn invariant_fiber_powers_are_annihilated_by_x() {
        // constant-base modes e^{ik theta} on the flat torus are X-invariant
        let s = build_surface(&SurfaceConfig::unit_flat_torus(16)).unwrap();
        let mut stack = ModeStack::new(s.clone());
        for k in 0..=8 {
            stack.insert(ModeSection::new(s.clone(), k, s.one_coeffs()).unwrap()).unwrap();
        }
        let x = apply(&GeometricOp::X, &stack).unwrap();
        assert!(x.total_l2() < 1e-12 * stack.total_l2());
    }

    #[test]
    fn structure_identities_hold_on_all_backends() {
        for s in surfaces() {
            let report = commutator_check(&s, 3, 5, 77).unwrap();
            for (label, worst) in &report.residuals {
                assert!(worst < &1e-8, "{} {label}: {worst}", s.kind());
            }
        }
    }

    #[test]
    fn energy_identity_balances() {
        for s in surfaces() {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for k in [-3i32, 0, 2] {
                let stack = random_headroom_stack(&s, k.abs(), &mut rng).unwrap();
                let u = stack.get(k).unwrap();
                let check = pestov_check(u).unwrap();
                assert!(check.residual < 1e-8, "{} k={k}: {}", s.kind(), check.residual);
            }
        }
        // flat torus: zero curvature and equal ladder magnitudes per slot
        let s = build_surface(&SurfaceConfig::unit_flat_torus(16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = ModeSection::random(s, -2, &mut rng).unwrap();
        let check = pestov_check(&u).unwrap();
        assert_abs_diff_eq!(check.lhs, check.rhs, epsilon = 1e-10 * check.lhs.abs());
    }

    #[test]
    fn szego_commutator_formula() {
        for s in surfaces() {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let stack = random_headroom_stack(&s, 4, &mut rng).unwrap();
            let res = szego_commutator_check(&stack).unwrap();
            assert!(res < 1e-10, "{}: {res}", s.kind());
        }
        // stacks without modes -1, 0 commute with the projection
        let s = build_surface(&SurfaceConfig::unit_flat_torus(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut stack = ModeStack::new(s.clone());
        stack.insert(ModeSection::random(s.clone(), 2, &mut rng).unwrap()).unwrap();
        stack.insert(ModeSection::random(s.clone(), -3, &mut rng).unwrap()).unwrap();
        let res = szego_commutator_check(&stack).unwrap();
        assert!(res < 1e-14);
    }

    #[test]
    fn kernel_dimensions_match_formulas() {
        let flat = build_surface(&SurfaceConfig::unit_flat_torus(12)).unwrap();
        let sphere = build_surface(&SurfaceConfig::round_sphere(8)).unwrap();
        for k in -5i32..=5 {
            for op in [LadderOp::Raise, LadderOp::Lower] {
                let r = kernel_report(&flat, op, k).unwrap();
                assert_eq!(r.dim_numeric, 1, "flat {op:?} k={k}");
                assert_eq!(r.dim_formula, 1);
                assert!(r.gap >= KERNEL_GAP);

                let r = kernel_report(&sphere, op, k).unwrap();
                assert_eq!(r.dim_numeric, r.dim_formula, "sphere {op:?} k={k}");
                assert!(r.gap >= KERNEL_GAP);
            }
        }
        // spot the closed forms at other genera
        assert_eq!(predicted_kernel_dim(0, LadderOp::Lower, -1), 3);
        assert_eq!(predicted_kernel_dim(0, LadderOp::Raise, 2), 5);
        assert_eq!(predicted_kernel_dim(2, LadderOp::Lower, 2), 3);
        assert_eq!(predicted_kernel_dim(2, LadderOp::Lower, 1), 2);
        assert_eq!(predicted_kernel_dim(2, LadderOp::Lower, -1), 0);
        assert_eq!(predicted_kernel_dim(3, LadderOp::Raise, -2), 6);
    }

    #[test]
    fn flat_kernel_basis_is_constant_section() {
        let flat = build_surface(&SurfaceConfig::unit_flat_torus(12)).unwrap();
        let r = kernel_report(&flat, LadderOp::Raise, 4).unwrap();
        assert_eq!(r.basis.len(), 1);
        let one = flat.one_coeffs();
        let overlap = flat.inner(4, r.basis[0].coeffs(), &one).unwrap().norm();
        let scale = r.basis[0].norm() * flat.norm(0, &one).unwrap();
        assert!(overlap > 0.999 * scale);
    }

    #[test]
    fn forward_solve_round_trips() {
        let sphere = build_surface(&SurfaceConfig::round_sphere(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        // raising from -1 to 0 is injective; the solve is a left inverse
        let w = ModeSection::random(sphere.clone(), -1, &mut rng).unwrap();
        let rhs = super::raise(&w).unwrap();
        let solve = solve_elliptic(LadderOp::Raise, &rhs).unwrap();
        assert_eq!(solve.status, SolveStatus::Unique);
        let mut diff = solve.solution.clone();
        diff.add_scaled(&w, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(diff.norm() < 1e-8 * w.norm());
        assert!(solve.residual < 1e-10 * rhs.norm());

        // lowering from degree 2 is injective as well
        let w = ModeSection::random(sphere.clone(), 2, &mut rng).unwrap();
        let rhs = super::lower(&w).unwrap();
        let solve = solve_elliptic(LadderOp::Lower, &rhs).unwrap();
        assert!(solve.residual < 1e-10 * rhs.norm());
        let mut diff = solve.solution.clone();
        diff.add_scaled(&w, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(diff.norm() < 1e-8 * w.norm());
    }

    #[test]
    fn cokernel_mass_stays_in_residual() {
        // lowering into degree 0 on the flat torus cannot reach constants
        // (they span the adjoint kernel), so the residual is all of ||rhs||
        let flat = build_surface(&SurfaceConfig::unit_flat_torus(12)).unwrap();
        let one = ModeSection::new(flat.clone(), 0, flat.one_coeffs()).unwrap();
        let solve = solve_elliptic(LadderOp::Lower, &one).unwrap();
        assert_eq!(solve.status, SolveStatus::MinimumNorm);
        assert_abs_diff_eq!(solve.residual, one.norm(), epsilon = 1e-10);
        assert!(solve.solution.norm() < 1e-12);
    }

    #[test]
    fn conformal_solve_uses_dense_path() {
        let s = build_surface(&SurfaceConfig::conformal_torus(
            8,
            vec![
                LambdaWave { n: [1, 0], re: 0.05, im: 0.0 },
                LambdaWave { n: [-1, 0], re: 0.05, im: 0.0 },
            ],
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = ModeSection::random(s.clone(), 0, &mut rng).unwrap();
        let image = s.eta_projected(0, w.coeffs(), false).unwrap();
        let rhs = ModeSection::new(s.clone(), -1, image).unwrap();
        let solve = solve_elliptic(LadderOp::Lower, &rhs).unwrap();
        // genus 1: one-dimensional kernel (the constants at degree 0), so
        // the solve returns the minimum-norm preimage and consumes the rhs
        assert_eq!(solve.status, SolveStatus::MinimumNorm);
        assert_eq!(solve.kernel_dim, 1);
        assert!(solve.residual < 1e-8 * rhs.norm().max(1.0));
    }
}

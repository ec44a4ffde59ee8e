//! Mode-space transport equations along the geodesic flow.
//!
//! The operator `X + pi* phi` (geodesic field plus a potential pulled back
//! from the base) acts on mode stacks degree by degree:
//!
//! ```text
//! f_k = eta+ u_{k-1} + phi u_k + eta- u_{k+1}
//! ```
//!
//! On the round sphere the lowering operator is injective on positive
//! degrees and the raising operator on negative ones, so a solution is
//! determined by its two middle modes (u_0, u_1): this module reconstructs
//! stacks from that seed pair, samples the stability ratio behind the
//! associated a priori estimate, and catalogs the flow-invariant
//! fibrewise-holomorphic stacks (explicit on the flat torus, provably only
//! constants on the sphere).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};
use crate::geometry::{Surface, SurfaceKind};
use crate::modes::{mode_norms, ModeSection, ModeStack};
use crate::operators::{
    apply, kernel_report, solve_elliptic, GeometricOp, LadderOp, KERNEL_TOL,
};

/// Mode-norm growth factor beyond the seed scale that aborts reconstruction.
pub const GROWTH_LIMIT: f64 = 1e6;

/// A transport equation `(X + pi* phi) u = f` truncated to degrees
/// |k| <= band.
pub struct TransportProblem {
    surface: Arc<Surface>,
    phi: ModeSection,
    f: ModeStack,
    band: i32,
}

impl TransportProblem {
    pub fn new(
        surface: Arc<Surface>,
        phi: ModeSection,
        f: ModeStack,
        band: i32,
    ) -> Result<Self> {
        surface.ensure_same(phi.surface())?;
        surface.ensure_same(f.surface())?;
        if phi.k() != 0 {
            return Err(GtlError::DegreeOutOfRange { k: phi.k(), max: 0 });
        }
        for k in f.degrees() {
            if k.abs() > band {
                return Err(GtlError::DegreeOutOfRange { k, max: band.unsigned_abs() as usize });
            }
        }
        Ok(TransportProblem { surface, phi, f, band })
    }

    /// Problem with a constant potential (e.g. `i lambda`) and no source.
    pub fn homogeneous(surface: Arc<Surface>, phi: Complex64, band: i32) -> Result<Self> {
        let phi = ModeSection::constant(surface.clone(), 0, phi)?;
        let f = ModeStack::new(surface.clone());
        TransportProblem::new(surface, phi, f, band)
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn phi(&self) -> &ModeSection {
        &self.phi
    }

    pub fn f(&self) -> &ModeStack {
        &self.f
    }

    pub fn band(&self) -> i32 {
        self.band
    }

    /// Apply `X + pi* phi` to a stack within the band (the image extends one
    /// degree past the input on each side).
    pub fn apply(&self, u: &ModeStack) -> Result<ModeStack> {
        self.surface.ensure_same(u.surface())?;
        for k in u.degrees() {
            if k.abs() > self.band {
                return Err(GtlError::DegreeOutOfRange {
                    k,
                    max: self.band.unsigned_abs() as usize,
                });
            }
        }
        let mut out = apply(&GeometricOp::X, u)?;
        let phi_u = apply(&GeometricOp::MultByPhi(self.phi.clone()), u)?;
        out.add_scaled_stack(&phi_u, Complex64::new(1.0, 0.0))?;
        Ok(out)
    }

    /// Reconstruct the solution with prescribed middle modes on the round
    /// sphere: upward solves invert the lowering operator on positive
    /// degrees, downward solves the raising operator on negative ones.
    pub fn reconstruct(
        &self,
        u0: &ModeSection,
        u1: &ModeSection,
        kmax: i32,
    ) -> Result<Reconstruction> {
        if self.surface.kind() != SurfaceKind::RoundSphere {
            return Err(GtlError::UnsupportedSurface {
                op: "reconstruct",
                backend: self.surface.kind().as_str(),
            });
        }
        self.surface.ensure_same(u0.surface())?;
        self.surface.ensure_same(u1.surface())?;

        let seed_scale = u0.norm().max(u1.norm());
        let bound = GROWTH_LIMIT * if seed_scale > 0.0 { seed_scale } else { self.f.total_l2() };

        let mut stack = ModeStack::new(self.surface.clone());
        stack.insert(u0.clone())?;
        stack.insert(u1.clone())?;

        // upward: the degree-k equation determines u_{k+1}
        for k in 1..kmax {
            let rhs = self.step_rhs(&stack, k, k - 1, k)?;
            let solve = solve_elliptic(LadderOp::Lower, &rhs)?;
            self.check_growth(k + 1, &solve.solution, bound)?;
            stack.insert(solve.solution)?;
        }
        // downward: the degree-k equation determines u_{k-1}
        for k in (1 - kmax..=0).rev() {
            let rhs = self.step_rhs(&stack, k, k + 1, k)?;
            let solve = solve_elliptic(LadderOp::Raise, &rhs)?;
            self.check_growth(k - 1, &solve.solution, bound)?;
            stack.insert(solve.solution)?;
        }

        // enforced equations: every degree the recursion stepped through
        let image = self.apply(&stack)?;
        let mut per_k_residual = Vec::new();
        let mut total_sq = 0.0;
        for k in 1 - kmax..kmax {
            let mut diff = image.coeffs_or_zero(k)?;
            for (d, r) in diff.iter_mut().zip(self.f.coeffs_or_zero(k)?) {
                *d -= r;
            }
            let res = self.surface.norm(k, &diff)?;
            total_sq += res * res;
            per_k_residual.push((k, res));
        }
        Ok(Reconstruction { stack, per_k_residual, residual: total_sq.sqrt() })
    }

    /// `f_k` minus the two already-known terms of the degree-k equation;
    /// `known` is the degree whose eta image is subtracted (k-1 upward,
    /// k+1 downward).
    fn step_rhs(&self, stack: &ModeStack, k: i32, known: i32, phi_deg: i32) -> Result<ModeSection> {
        let mut rhs = self.f.coeffs_or_zero(k)?;
        let eta = if known < k {
            self.surface.eta_plus(known, &stack.coeffs_or_zero(known)?)?
        } else {
            self.surface.eta_minus(known, &stack.coeffs_or_zero(known)?)?
        };
        let phi_u =
            self.surface
                .multiply(0, self.phi.coeffs(), phi_deg, &stack.coeffs_or_zero(phi_deg)?)?;
        for ((r, e), p) in rhs.iter_mut().zip(&eta).zip(&phi_u) {
            *r -= e + p;
        }
        ModeSection::new(self.surface.clone(), k, rhs)
    }

    fn check_growth(&self, k: i32, u: &ModeSection, bound: f64) -> Result<()> {
        let norm = u.norm();
        if bound > 0.0 && norm > bound {
            return Err(GtlError::GrowthDetected { k, norm, bound });
        }
        Ok(())
    }

    /// Ratio behind the stability estimate
    /// `||u||_{H^s} <= C (||(X + pi* phi) u||_{H^s} + ||u_0||_{H^{s+1}} + ||u_1||_{H^{s+1}})`,
    /// together with the potential-only variant `||u|| / ||(X + pi* phi) u||`
    /// relevant for constant `phi = i lambda` with non-integer lambda.
    pub fn stability_ratio(&self, u: &ModeStack, s: f64) -> Result<StabilityRatio> {
        let hs = mode_norms(u, s)?.total_hs;
        let image = self.apply(u)?;
        let transport = mode_norms(&image, s)?.total_hs;
        let u0 = ModeSection::new(self.surface.clone(), 0, u.coeffs_or_zero(0)?)?;
        let u1 = ModeSection::new(self.surface.clone(), 1, u.coeffs_or_zero(1)?)?;
        let seeds = u0.hs_norm(s + 1.0) + u1.hs_norm(s + 1.0);
        Ok(StabilityRatio {
            hs_norm: hs,
            transport_norm: transport,
            seed_norm: seeds,
            ratio: hs / (transport + seeds),
            zoll_ratio: hs / transport,
        })
    }
}

/// Output of [`TransportProblem::reconstruct`].
pub struct Reconstruction {
    pub stack: ModeStack,
    /// ||(X + pi* phi) u - f|| per enforced degree
    pub per_k_residual: Vec<(i32, f64)>,
    pub residual: f64,
}

/// One evaluation of the stability quotient.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityRatio {
    pub hs_norm: f64,
    pub transport_norm: f64,
    pub seed_norm: f64,
    /// `||u||_s / (||(X+phi)u||_s + ||u_0||_{s+1} + ||u_1||_{s+1})`
    pub ratio: f64,
    /// `||u||_s / ||(X+phi)u||_s` (infinite on invariant stacks)
    pub zoll_ratio: f64,
}

/// One row of a stability sampling table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilitySample {
    pub index: usize,
    pub ratio: f64,
    pub zoll_ratio: f64,
    /// max of `ratio` over samples 0..=index
    pub running_max: f64,
}

/// Empirical stability constants over a seeded sample family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityTable {
    pub s: f64,
    pub kspan: i32,
    pub seed: u64,
    pub samples: Vec<StabilitySample>,
}

impl StabilityTable {
    pub fn max_ratio(&self) -> f64 {
        self.samples.last().map_or(0.0, |r| r.running_max)
    }

    /// Running max after the first n samples.
    pub fn max_after(&self, n: usize) -> Option<f64> {
        n.checked_sub(1).and_then(|i| self.samples.get(i)).map(|r| r.running_max)
    }
}

/// Sample the stability quotient on random stacks with degrees |k| <= kspan
/// (an empirical lower bound for the constant in the a priori estimate; no
/// claim is made about the true constant).
pub fn stability_sample(
    problem: &TransportProblem,
    s: f64,
    kspan: i32,
    samples: usize,
    seed: u64,
) -> Result<StabilityTable> {
    use rand::SeedableRng;
    if problem.surface().kind() != SurfaceKind::RoundSphere {
        return Err(GtlError::UnsupportedSurface {
            op: "stability_sample",
            backend: problem.surface().kind().as_str(),
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(samples);
    let mut running_max = 0.0_f64;
    for index in 0..samples {
        let u = ModeStack::random(problem.surface().clone(), -kspan, kspan, &mut rng)?;
        let r = problem.stability_ratio(&u, s)?;
        running_max = running_max.max(r.ratio);
        rows.push(StabilitySample {
            index,
            ratio: r.ratio,
            zoll_ratio: r.zoll_ratio,
            running_max,
        });
    }
    Ok(StabilityTable { s, kspan, seed, samples: rows })
}

/// What to catalog: an explicit coefficient sequence on the flat torus, or a
/// kernel-dimension probe of the forced-constancy cascade on the sphere.
pub enum CatalogRequest {
    /// `u_k = c_k e^{ik theta}` from `c_k`, k = 0, 1, ...
    TorusCoefficients(Vec<Complex64>),
    /// Probe degrees 0..=kmax.
    SphereProbe { kmax: i32 },
}

/// Flow-invariant fibrewise-holomorphic content of a backend.
pub enum CatalogResult {
    /// Explicit invariant stack with its measured ||X u||.
    Invariant { stack: ModeStack, x_norm: f64 },
    /// Certificate that only constants are invariant.
    Trivial(TrivialityCertificate),
}

/// One degree of the forced-constancy cascade.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogStep {
    pub k: i32,
    pub kernel_dim: usize,
    pub formula_dim: usize,
    pub conclusion: String,
}

/// Evidence that invariant fibrewise-holomorphic stacks on the sphere are
/// constant: the lowering operator annihilates only constants at degree 0
/// and nothing at positive degrees, and raising kills constants, so the mode
/// recursion `eta+ u_{k-1} + eta- u_{k+1} = 0` collapses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrivialityCertificate {
    pub steps: Vec<CatalogStep>,
    /// ||eta+ 1||: must vanish for the cascade to start at the constants
    pub eta_plus_const_norm: f64,
    pub forced_constant: bool,
}

/// Invariant first-integral catalog: explicit stacks on the flat torus,
/// a triviality certificate on the round sphere.
pub fn invariant_catalog(surface: &Arc<Surface>, request: CatalogRequest) -> Result<CatalogResult> {
    match (surface.kind(), request) {
        (SurfaceKind::FlatTorus, CatalogRequest::TorusCoefficients(c)) => {
            let mut stack = ModeStack::new(surface.clone());
            for (k, ck) in c.into_iter().enumerate() {
                stack.insert(ModeSection::constant(surface.clone(), k as i32, ck)?)?;
            }
            let x_norm = apply(&GeometricOp::X, &stack)?.total_l2();
            Ok(CatalogResult::Invariant { stack, x_norm })
        }
        (SurfaceKind::RoundSphere, CatalogRequest::SphereProbe { kmax }) => {
            let one = surface.one_coeffs();
            let eta_plus_const_norm = surface.norm(1, &surface.eta_plus(0, &one)?)?;
            let mut steps = Vec::new();
            for k in 0..=kmax {
                let report = kernel_report(surface, LadderOp::Lower, k)?;
                let conclusion = if k == 0 {
                    format!("ker has dim {}: u_0 confined to constants", report.dim_numeric)
                } else {
                    format!("ker has dim {}: u_{k} forced to zero", report.dim_numeric)
                };
                steps.push(CatalogStep {
                    k,
                    kernel_dim: report.dim_numeric,
                    formula_dim: report.dim_formula,
                    conclusion,
                });
            }
            let forced_constant = eta_plus_const_norm < KERNEL_TOL
                && steps.first().is_some_and(|s| s.kernel_dim == 1)
                && steps.iter().skip(1).all(|s| s.kernel_dim == 0);
            Ok(CatalogResult::Trivial(TrivialityCertificate {
                steps,
                eta_plus_const_norm,
                forced_constant,
            }))
        }
        (kind, _) => {
            Err(GtlError::UnsupportedSurface { op: "invariant_catalog", backend: kind.as_str() })
        }
    }
}

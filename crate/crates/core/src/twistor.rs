//! Fibrewise-holomorphic calculus on the unit disk bundle over a surface.
//!
//! A [`TwistorSeries`] is a radial power series `h = sum_{k>=m} u_k w^{k-m}`
//! in the fiber coordinate `w`, stored through its boundary modes `u_k`. The
//! module provides the trace/extension round trip with growth diagnostics
//! (mode-norm exponents against radial sup-norm blowup), the Cauchy-product
//! algebra of such series, a coefficient-level Dolbeault complex on mixed
//! `(w, wbar)` polynomial fields, an exact fiber antiderivative, and the
//! line-bundle obstruction and gauge functionals on the flat torus.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};
use crate::geometry::{Surface, SurfaceKind};
use crate::modes::{fit_decay_exponent, uniform_fiber_grid, DecayFit, ModeSection, ModeStack};
use crate::operators::{apply, GeometricOp};

/// A series is certified fibrewise holomorphic-invariant when every paired
/// ladder residual stays below this.
pub const HOLOMORPHY_TOL: f64 = 1e-8;

/// Obstruction functionals with modulus below this are reported as vanishing.
pub const OBSTRUCTION_TOL: f64 = 1e-10;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const NEG: Complex64 = Complex64::new(-1.0, 0.0);

/// Radial power series `sum_{k>=m} u_k w^{k-m}` on the disk bundle, stored by
/// its boundary modes. Pure powers of `w` only, so the fiber derivative in
/// `wbar` vanishes by construction; the term at degree k carries vertical
/// weight m for every k.
#[derive(Clone)]
pub struct TwistorSeries {
    surface: Arc<Surface>,
    m: i32,
    sections: BTreeMap<i32, ModeSection>,
}

impl TwistorSeries {
    /// Promote a stack of boundary modes to the interior series with lowest
    /// degree `m`. Nonzero modes below `m` cannot be represented.
    pub fn extend(u: &ModeStack, m: i32) -> Result<Self> {
        let mut sections = BTreeMap::new();
        for (&k, sec) in u.iter() {
            if k < m {
                if sec.norm() > 0.0 {
                    return Err(GtlError::NegativeModesPresent { m, k });
                }
            } else {
                sections.insert(k, sec.clone());
            }
        }
        Ok(TwistorSeries { surface: u.surface().clone(), m, sections })
    }

    /// The constant series `h = 1` (single mode at degree zero).
    pub fn unit(surface: Arc<Surface>) -> Result<Self> {
        let mut stack = ModeStack::new(surface.clone());
        stack.insert(ModeSection::constant(surface, 0, ONE)?)?;
        TwistorSeries::extend(&stack, 0)
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn kmax(&self) -> Option<i32> {
        self.sections.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn get(&self, k: i32) -> Option<&ModeSection> {
        self.sections.get(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i32, &ModeSection)> {
        self.sections.iter()
    }

    /// Boundary modes of the series; inverse of [`TwistorSeries::extend`]
    /// bit for bit.
    pub fn trace(&self) -> ModeStack {
        let mut stack = ModeStack::new(self.surface.clone());
        for sec in self.sections.values() {
            stack.insert(sec.clone()).expect("same surface");
        }
        stack
    }

    /// The series as a single-column polynomial field (pure `w` powers).
    pub fn as_field(&self) -> CoefficientField {
        let mut field = CoefficientField::new(self.surface.clone(), self.m);
        for (&k, sec) in &self.sections {
            field.set_term((k - self.m) as u32, 0, sec.clone()).expect("degree bookkeeping");
        }
        field
    }

    /// Sup norm of the `deriv`-th fiber-angle derivative of the restriction
    /// `h|_{|w|=r}`, sampled on the base grid times a uniform fiber grid.
    pub fn radial_sup(&self, r: f64, deriv: u32) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(GtlError::RadiusOutOfRange(r));
        }
        let Some(kmax) = self.kmax() else { return Ok(0.0) };
        let span = (kmax - self.m) as usize;
        let mut scaled = ModeStack::new(self.surface.clone());
        for (&k, sec) in &self.sections {
            let n = k - self.m;
            let factor = r.powi(n) * (n as f64).powi(deriv as i32);
            let mut s = sec.clone();
            s.scale(Complex64::new(factor, 0.0));
            scaled.insert(s)?;
        }
        let thetas = uniform_fiber_grid(16.max(2 * span + 9));
        let values = scaled.synthesize(&thetas)?;
        Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    /// Residuals `|eta_+ u_{k-2} + eta_- u_k|` for k from m to kmax+2
    /// (missing modes count as zero). All below [`HOLOMORPHY_TOL`] certifies
    /// that the trace satisfies the invariance equation X u = 0.
    pub fn holomorphy_residual(&self) -> Result<HolomorphyReport> {
        let mut residuals = Vec::new();
        let mut max_residual = 0.0f64;
        if let Some(kmax) = self.kmax() {
            for k in self.m..=kmax + 2 {
                let mut acc = ModeSection::zero(self.surface.clone(), k - 1)?;
                if let Some(lo) = self.sections.get(&(k - 2)) {
                    let up = self.surface.eta_plus(k - 2, lo.coeffs())?;
                    let up = ModeSection::new(self.surface.clone(), k - 1, up)?;
                    acc.add_scaled(&up, ONE)?;
                }
                if let Some(hi) = self.sections.get(&k) {
                    let down = self.surface.eta_minus(k, hi.coeffs())?;
                    let down = ModeSection::new(self.surface.clone(), k - 1, down)?;
                    acc.add_scaled(&down, ONE)?;
                }
                let r = acc.norm();
                max_residual = max_residual.max(r);
                residuals.push((k, r));
            }
        }
        Ok(HolomorphyReport {
            certified: max_residual < HOLOMORPHY_TOL,
            max_residual,
            residuals,
        })
    }

    /// Cauchy product in the fiber coordinate with base-wise section
    /// multiplication; lowest degrees add.
    pub fn product(&self, other: &TwistorSeries) -> Result<TwistorSeries> {
        self.surface.ensure_same(&other.surface)?;
        let mut sections: BTreeMap<i32, ModeSection> = BTreeMap::new();
        for (&i, ui) in &self.sections {
            for (&j, vj) in &other.sections {
                let coeffs = self.surface.multiply(i, ui.coeffs(), j, vj.coeffs())?;
                let sec = ModeSection::new(self.surface.clone(), i + j, coeffs)?;
                match sections.get_mut(&(i + j)) {
                    Some(acc) => acc.add_scaled(&sec, ONE)?,
                    None => {
                        sections.insert(i + j, sec);
                    }
                }
            }
        }
        Ok(TwistorSeries {
            surface: self.surface.clone(),
            m: self.m + other.m,
            sections,
        })
    }
}

/// Per-degree holomorphy residuals of a series and the certificate verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolomorphyReport {
    /// (k, |eta_+ u_{k-2} + eta_- u_k|) in degree order.
    pub residuals: Vec<(i32, f64)>,
    pub max_residual: f64,
    pub certified: bool,
}

/// Trace of a series together with the two growth exponents and the
/// equivalence verdict between them.
pub struct TraceGrowth {
    pub trace: ModeStack,
    /// Fitted exponent of the mode norms against the term index.
    pub p_modes: f64,
    /// Fitted blowup exponent of radial sup norms against 1/(1-r).
    pub p_radial: f64,
    pub mode_fit: Option<DecayFit>,
    /// (ln 1/(1-r), ln sup) pairs entering the radial fit.
    pub radial_points: Vec<(f64, f64)>,
    /// Both directions of the polynomial-growth equivalence hold: radial
    /// blowup at most one order above mode growth, mode growth at most half
    /// an order above radial blowup.
    pub pass: bool,
}

/// Evaluate the series on circles `|w| = r` and compare the radial blowup
/// exponent with the mode-growth exponent of its trace. `deriv` is the order
/// of the fiber-angle derivative taken before the sup.
pub fn trace_and_growth(h: &TwistorSeries, radii: &[f64], deriv: u32) -> Result<TraceGrowth> {
    let mut radial_points = Vec::new();
    for &r in radii {
        let sup = h.radial_sup(r, deriv)?;
        if sup > 0.0 {
            radial_points.push(((1.0 / (1.0 - r)).ln(), sup.ln()));
        }
    }
    let p_radial = ls_slope(&radial_points);
    let mut ks = Vec::new();
    let mut norms = Vec::new();
    for (&k, sec) in h.iter() {
        ks.push(k - h.m());
        norms.push(sec.norm());
    }
    let mode_fit = fit_decay_exponent(&ks, &norms);
    let p_modes = mode_fit.map_or(0.0, |f| f.exponent);
    let pass = p_radial <= p_modes + 1.5 && p_modes <= p_radial + 0.5;
    Ok(TraceGrowth { trace: h.trace(), p_modes, p_radial, mode_fit, radial_points, pass })
}

/// Radii `1 - 2^-j`, j starting at 2, kept while the blowup scale `2^(j+1)`
/// stays within the number of stored terms (so truncation does not flatten
/// the fit); at least two radii are always returned.
pub fn default_radii(n_terms: usize) -> Vec<f64> {
    (2u32..=10)
        .filter(|j| 1u64 << (j + 1) <= n_terms.max(16) as u64)
        .map(|j| 1.0 - 0.5f64.powi(j as i32))
        .collect()
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (n * sxy - sx * sy) / denom
}

/// Polynomial field `sum_{a,b} h_{a,b} w^a wbar^[b]` of weight `m`: the
/// (a, b) term is a section of degree `m + a - b` measured against the
/// divided power `wbar^[b] = wbar^b / b!`. Divided powers make the fiber
/// derivative and antiderivative below exact slot shifts with no scalar
/// arithmetic; terms with b <= 1 coincide with plain monomial coefficients.
#[derive(Clone)]
pub struct CoefficientField {
    surface: Arc<Surface>,
    m: i32,
    terms: BTreeMap<(u32, u32), ModeSection>,
}

impl CoefficientField {
    pub fn new(surface: Arc<Surface>, m: i32) -> Self {
        CoefficientField { surface, m, terms: BTreeMap::new() }
    }

    /// Independent Gaussian sections in every slot (a, b) up to the given
    /// fiber degrees.
    pub fn random<R: Rng>(
        surface: Arc<Surface>,
        m: i32,
        amax: u32,
        bmax: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let mut field = CoefficientField::new(surface.clone(), m);
        for a in 0..=amax {
            for b in 0..=bmax {
                let k = m + a as i32 - b as i32;
                field.set_term(a, b, ModeSection::random(surface.clone(), k, rng)?)?;
            }
        }
        Ok(field)
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    /// Vertical weight: every stored term has degree `m + a - b`.
    pub fn weight(&self) -> i32 {
        self.m
    }

    pub fn term(&self, a: u32, b: u32) -> Option<&ModeSection> {
        self.terms.get(&(a, b))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &ModeSection)> {
        self.terms.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn expected_degree(&self, a: u32, b: u32) -> i32 {
        self.m + a as i32 - b as i32
    }

    /// Store the (a, b) term, replacing any previous one. The section degree
    /// must equal `m + a - b`; the reported error carries the degree offset.
    pub fn set_term(&mut self, a: u32, b: u32, section: ModeSection) -> Result<()> {
        self.surface.ensure_same(section.surface())?;
        let expected = self.expected_degree(a, b);
        if section.k() != expected {
            return Err(GtlError::DegreeOutOfRange { k: section.k() - expected, max: 0 });
        }
        self.terms.insert((a, b), section);
        Ok(())
    }

    fn accumulate(&mut self, a: u32, b: u32, section: ModeSection) -> Result<()> {
        let expected = self.expected_degree(a, b);
        if section.k() != expected {
            return Err(GtlError::DegreeOutOfRange { k: section.k() - expected, max: 0 });
        }
        match self.terms.get_mut(&(a, b)) {
            Some(acc) => acc.add_scaled(&section, ONE),
            None => {
                self.terms.insert((a, b), section);
                Ok(())
            }
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for sec in self.terms.values_mut() {
            sec.scale(c);
        }
    }

    /// self += c * other; weights must agree (the error carries the offset).
    pub fn add_scaled(&mut self, other: &CoefficientField, c: Complex64) -> Result<()> {
        self.surface.ensure_same(&other.surface)?;
        if other.m != self.m {
            return Err(GtlError::DegreeOutOfRange { k: other.m - self.m, max: 0 });
        }
        for (&(a, b), sec) in &other.terms {
            let mut scaled = sec.clone();
            scaled.scale(c);
            self.accumulate(a, b, scaled)?;
        }
        Ok(())
    }

    /// Root of the summed squared term norms (terms are orthogonal in the
    /// fiber variables).
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|s| s.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Base part of the boundary Cauchy-Riemann operator on fields:
    /// `w^2 eta_+ + eta_-` termwise, dropping the weight by one. The raising
    /// part shifts (a, b) to (a+2, b) with degree k+1; the lowering part
    /// keeps (a, b) with degree k-1.
    pub fn dbar_base(&self) -> Result<CoefficientField> {
        let mut out = CoefficientField::new(self.surface.clone(), self.m - 1);
        for (&(a, b), sec) in &self.terms {
            let up = self.surface.eta_plus(sec.k(), sec.coeffs())?;
            out.accumulate(a + 2, b, ModeSection::new(self.surface.clone(), sec.k() + 1, up)?)?;
            let down = self.surface.eta_minus(sec.k(), sec.coeffs())?;
            out.accumulate(a, b, ModeSection::new(self.surface.clone(), sec.k() - 1, down)?)?;
        }
        Ok(out)
    }

    /// Fiber part of the boundary Cauchy-Riemann operator: the derivative in
    /// `wbar`. In the divided-power basis this moves (a, b) to (a, b-1) with
    /// the section unchanged, so it is exact; b = 0 terms are annihilated.
    pub fn dbar_fiber(&self) -> CoefficientField {
        let mut out = CoefficientField::new(self.surface.clone(), self.m - 1);
        for (&(a, b), sec) in &self.terms {
            if b >= 1 {
                out.terms.insert((a, b - 1), sec.clone());
            }
        }
        out
    }

    /// Termwise antiderivative in `wbar`: moves (a, b) to (a, b+1) with the
    /// section unchanged (divided powers), raising the weight by one.
    /// [`CoefficientField::dbar_fiber`] of the result reproduces the input
    /// bit for bit; the kernel of the derivative is exactly the pure-`w`
    /// fields, so adding any [`TwistorSeries::as_field`] leaves the
    /// derivative untouched.
    pub fn fiber_antiderivative(&self) -> CoefficientField {
        let mut out = CoefficientField::new(self.surface.clone(), self.m + 1);
        for (&(a, b), sec) in &self.terms {
            out.terms.insert((a, b + 1), sec.clone());
        }
        out
    }
}

/// Solve the fiber derivative equation on a polynomial field: returns `g`
/// of weight m with derivative exactly `f` (of weight m-1).
pub fn dbar_omega_solve(f: &CoefficientField) -> CoefficientField {
    f.fiber_antiderivative()
}

fn choose2(x: u8) -> usize {
    match x {
        0 | 2 => 1,
        1 => 2,
        _ => 0,
    }
}

/// Coefficient tuple of a (p, q) form on the disk bundle in the fixed slot
/// order of the structure table: `C(2,p) * C(2,q)` polynomial fields, all of
/// weight p - q.
#[derive(Clone)]
pub struct DolbeaultTuple {
    surface: Arc<Surface>,
    p: u8,
    q: u8,
    entries: Vec<CoefficientField>,
}

impl DolbeaultTuple {
    /// Entries must number `C(2,p) * C(2,q)` and all carry weight p - q;
    /// shape violations report the bidegree.
    pub fn new(p: u8, q: u8, entries: Vec<CoefficientField>) -> Result<Self> {
        let want = choose2(p) * choose2(q);
        if p > 2 || q > 2 || entries.len() != want {
            return Err(GtlError::InvalidBidegree { p, q });
        }
        let weight = p as i32 - q as i32;
        let surface = entries[0].surface().clone();
        for e in &entries {
            surface.ensure_same(e.surface())?;
            if e.weight() != weight {
                return Err(GtlError::DegreeOutOfRange { k: e.weight() - weight, max: 0 });
            }
        }
        Ok(DolbeaultTuple { surface, p, q, entries })
    }

    /// Independent random entries with fiber degrees up to (amax, bmax).
    pub fn random<R: Rng>(
        surface: Arc<Surface>,
        p: u8,
        q: u8,
        amax: u32,
        bmax: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let count = choose2(p) * choose2(q);
        if p > 2 || q > 2 || count == 0 {
            return Err(GtlError::InvalidBidegree { p, q });
        }
        let weight = p as i32 - q as i32;
        let entries = (0..count)
            .map(|_| CoefficientField::random(surface.clone(), weight, amax, bmax, rng))
            .collect::<Result<Vec<_>>>()?;
        DolbeaultTuple::new(p, q, entries)
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn p(&self) -> u8 {
        self.p
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn entries(&self) -> &[CoefficientField] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// One step of the coefficient Dolbeault complex, mapping (p, q) tuples
    /// to (p, q+1) tuples; the square of this map vanishes identically
    /// because the base and fiber parts commute termwise.
    pub fn d(&self) -> Result<DolbeaultTuple> {
        let e = &self.entries;
        let out = match (self.p, self.q) {
            (0 | 2, 0) => vec![e[0].dbar_base()?, e[0].dbar_fiber()],
            (0 | 2, 1) => {
                let mut t = e[0].dbar_fiber();
                t.scale(NEG);
                t.add_scaled(&e[1].dbar_base()?, ONE)?;
                vec![t]
            }
            (1, 0) => {
                let mut v = Vec::with_capacity(4);
                for h in e {
                    let mut base = h.dbar_base()?;
                    base.scale(NEG);
                    let mut fiber = h.dbar_fiber();
                    fiber.scale(NEG);
                    v.push(base);
                    v.push(fiber);
                }
                v
            }
            (1, 1) => {
                let mut first = e[0].dbar_fiber();
                first.add_scaled(&e[1].dbar_base()?, NEG)?;
                let mut second = e[2].dbar_fiber();
                second.add_scaled(&e[3].dbar_base()?, NEG)?;
                vec![first, second]
            }
            (p, q) => return Err(GtlError::InvalidBidegree { p, q }),
        };
        DolbeaultTuple::new(self.p, self.q + 1, out)
    }
}

/// Outcome of the line-bundle obstruction functionals on a flat torus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionReport {
    /// Mean of the degree -1 mode over the base (the class functional).
    pub period: Complex64,
    /// Period reduced modulo the pullback lattice pi*Z + pi*i*Z; only
    /// computed on the unit square torus.
    pub period_reduced: Option<Complex64>,
    /// Whether the reduced period vanishes within [`OBSTRUCTION_TOL`].
    pub class_vanishes: Option<bool>,
    /// Integral of the degree 0 mode against the area form.
    pub integral: Complex64,
    pub integral_vanishes: bool,
}

/// Evaluate the two obstruction functionals of a connection-like stack `a`
/// on a flat torus: the mean of its degree -1 mode and the integral of its
/// degree 0 mode. Modes below -1 must vanish.
pub fn bundle_obstruction(a: &ModeStack) -> Result<ObstructionReport> {
    let surface = a.surface();
    if surface.kind() != SurfaceKind::FlatTorus {
        return Err(GtlError::UnsupportedSurface {
            op: "bundle_obstruction",
            backend: surface.kind().as_str(),
        });
    }
    for (&k, sec) in a.iter() {
        if k < -1 && sec.norm() > 0.0 {
            return Err(GtlError::ModesBelowMinusOne { k });
        }
    }
    let period = surface.mean_value(&a.coeffs_or_zero(-1)?)?;
    let integral = surface.integral(&a.coeffs_or_zero(0)?)?;
    let unit_lattice = surface.torus_lattice() == Some([[1.0, 0.0], [0.0, 1.0]]);
    let (period_reduced, class_vanishes) = if unit_lattice {
        let pi = std::f64::consts::PI;
        let reduced = Complex64::new(
            period.re - pi * (period.re / pi).round(),
            period.im - pi * (period.im / pi).round(),
        );
        (Some(reduced), Some(reduced.norm() < OBSTRUCTION_TOL))
    } else {
        (None, None)
    };
    Ok(ObstructionReport {
        period,
        period_reduced,
        class_vanishes,
        integral,
        integral_vanishes: integral.norm() < OBSTRUCTION_TOL,
    })
}

/// The logarithmic derivative `psi^-1 X psi` of a nonvanishing base function
/// as a two-mode stack at degrees +1 and -1.
pub fn gauge_pullback(psi: &ModeSection) -> Result<ModeStack> {
    if psi.k() != 0 {
        return Err(GtlError::DegreeOutOfRange { k: psi.k(), max: 0 });
    }
    let surface = psi.surface().clone();
    let inv = surface.reciprocal(psi.coeffs())?;
    let mut out = ModeStack::new(surface.clone());
    let up = surface.eta_plus(0, psi.coeffs())?;
    out.insert(ModeSection::new(surface.clone(), 1, surface.multiply(0, &inv, 1, &up)?)?)?;
    let down = surface.eta_minus(0, psi.coeffs())?;
    out.insert(ModeSection::new(surface.clone(), -1, surface.multiply(0, &inv, -1, &down)?)?)?;
    Ok(out)
}

/// Residual `|X w - a - psi^-1 X psi|` of the gauge-transport equation; a
/// value below 1e-8 certifies that `a` is gauge-equivalent to the trivial
/// connection through `psi` and the fibrewise-holomorphic `w`.
pub fn gauge_residual(a: &ModeStack, psi: &ModeSection, w: &ModeStack) -> Result<f64> {
    let surface = psi.surface();
    surface.ensure_same(a.surface())?;
    surface.ensure_same(w.surface())?;
    for (&k, sec) in w.iter() {
        if k < 0 && sec.norm() > 0.0 {
            return Err(GtlError::NegativeModesPresent { m: 0, k });
        }
    }
    let mut diff = apply(&GeometricOp::X, w)?;
    diff.add_scaled_stack(a, NEG)?;
    diff.add_scaled_stack(&gauge_pullback(psi)?, NEG)?;
    Ok(diff.total_l2())
}

#[derive(Serialize, Deserialize)]
struct SeriesRecord {
    m: i32,
    k: i32,
    basis_id: String,
    coefficients: Vec<(f64, f64)>,
}

/// Serialize a series as JSON lines, one record per mode in degree order.
pub fn write_series_jsonl<W: Write>(h: &TwistorSeries, mut w: W) -> Result<()> {
    for (&k, section) in h.iter() {
        let record = SeriesRecord {
            m: h.m(),
            k,
            basis_id: h.surface().label().to_string(),
            coefficients: section.coeffs().iter().map(|c| (c.re, c.im)).collect(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| GtlError::Deserialize(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| GtlError::Deserialize(e.to_string()))?;
    }
    Ok(())
}

/// Read a series written by [`write_series_jsonl`]; records must agree on
/// the lowest degree and match the surface's basis identity.
pub fn read_series_jsonl<R: BufRead>(surface: &Arc<Surface>, r: R) -> Result<TwistorSeries> {
    let mut m: Option<i32> = None;
    let mut stack = ModeStack::new(surface.clone());
    for line in r.lines() {
        let line = line.map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SeriesRecord =
            serde_json::from_str(&line).map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if record.basis_id != surface.label() {
            return Err(GtlError::SurfaceMismatch);
        }
        match m {
            None => m = Some(record.m),
            Some(m0) if m0 != record.m => {
                return Err(GtlError::Deserialize("inconsistent lowest degree".into()))
            }
            _ => {}
        }
        let coeffs = record.coefficients.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        stack.insert(ModeSection::new(surface.clone(), record.k, coeffs)?)?;
    }
    let m = m.ok_or(GtlError::EmptyStack)?;
    TwistorSeries::extend(&stack, m)
}

#[derive(Serialize, Deserialize)]
struct TupleRecord {
    p: u8,
    q: u8,
    slot: usize,
    a: u32,
    b: u32,
    basis_id: String,
    coefficients: Vec<(f64, f64)>,
}

/// Serialize a tuple as JSON lines, one record per stored (slot, a, b) term.
pub fn write_tuple_jsonl<W: Write>(t: &DolbeaultTuple, mut w: W) -> Result<()> {
    for (slot, field) in t.entries().iter().enumerate() {
        for (&(a, b), section) in field.iter() {
            let record = TupleRecord {
                p: t.p(),
                q: t.q(),
                slot,
                a,
                b,
                basis_id: t.surface().label().to_string(),
                coefficients: section.coeffs().iter().map(|c| (c.re, c.im)).collect(),
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| GtlError::Deserialize(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| GtlError::Deserialize(e.to_string()))?;
        }
    }
    Ok(())
}

/// Read a tuple written by [`write_tuple_jsonl`]; all records must agree on
/// the bidegree and match the surface's basis identity.
pub fn read_tuple_jsonl<R: BufRead>(surface: &Arc<Surface>, r: R) -> Result<DolbeaultTuple> {
    let mut shape: Option<(u8, u8)> = None;
    let mut entries: Vec<CoefficientField> = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TupleRecord =
            serde_json::from_str(&line).map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if record.basis_id != surface.label() {
            return Err(GtlError::SurfaceMismatch);
        }
        match shape {
            None => {
                let count = choose2(record.p) * choose2(record.q);
                if record.p > 2 || record.q > 2 || count == 0 {
                    return Err(GtlError::InvalidBidegree { p: record.p, q: record.q });
                }
                let weight = record.p as i32 - record.q as i32;
                entries = (0..count)
                    .map(|_| CoefficientField::new(surface.clone(), weight))
                    .collect();
                shape = Some((record.p, record.q));
            }
            Some(s) if s != (record.p, record.q) => {
                return Err(GtlError::Deserialize("inconsistent bidegree".into()))
            }
            _ => {}
        }
        if record.slot >= entries.len() {
            return Err(GtlError::Deserialize(format!("slot {} out of range", record.slot)));
        }
        let coeffs: Vec<Complex64> =
            record.coefficients.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let k = entries[record.slot].expected_degree(record.a, record.b);
        entries[record.slot].set_term(
            record.a,
            record.b,
            ModeSection::new(surface.clone(), k, coeffs)?,
        )?;
    }
    let (p, q) = shape.ok_or(GtlError::EmptyStack)?;
    DolbeaultTuple::new(p, q, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, LambdaWave, SurfaceConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(n: usize) -> Arc<Surface> {
        build_surface(&SurfaceConfig::unit_flat_torus(n)).unwrap()
    }

    fn sphere(lmax: usize) -> Arc<Surface> {
        build_surface(&SurfaceConfig::round_sphere(lmax)).unwrap()
    }

    fn conformal(n: usize) -> Arc<Surface> {
        let waves = vec![
            LambdaWave { n: [1, 0], re: 0.05, im: 0.0 },
            LambdaWave { n: [-1, 0], re: 0.05, im: 0.0 },
        ];
        build_surface(&SurfaceConfig::conformal_torus(n, waves)).unwrap()
    }

    /// Series with constant base coefficients c_k at degrees m..m+len-1.
    fn const_series(s: &Arc<Surface>, m: i32, cs: &[f64]) -> TwistorSeries {
        let mut stack = ModeStack::new(s.clone());
        for (i, &c) in cs.iter().enumerate() {
            let k = m + i as i32;
            stack.insert(ModeSection::constant(s.clone(), k, Complex64::new(c, 0.0)).unwrap())
                .unwrap();
        }
        TwistorSeries::extend(&stack, m).unwrap()
    }

    /// Degree-k section concentrated on the single torus wave n.
    fn wave_section(s: &Arc<Surface>, k: i32, n: [i32; 2], c: Complex64) -> ModeSection {
        let tau = std::f64::consts::TAU;
        let freqs = s.torus_frequencies().unwrap();
        let mut coeffs = s.zero_coeffs(k).unwrap();
        let idx = freqs
            .iter()
            .position(|q| {
                (q[0] - tau * n[0] as f64).abs() < 1e-9 && (q[1] - tau * n[1] as f64).abs() < 1e-9
            })
            .unwrap();
        coeffs[idx] = c;
        ModeSection::new(s.clone(), k, coeffs).unwrap()
    }

    /// Random section with torus support trimmed to max frequency `cap`.
    fn trimmed_random(s: &Arc<Surface>, k: i32, cap: f64, rng: &mut ChaCha8Rng) -> ModeSection {
        let mut sec = ModeSection::random(s.clone(), k, rng).unwrap();
        if let Some(freqs) = s.torus_frequencies() {
            let tau = std::f64::consts::TAU;
            for (c, q) in sec.coeffs_mut().iter_mut().zip(&freqs) {
                if (q[0] / tau).abs() > cap || (q[1] / tau).abs() > cap {
                    *c = Complex64::default();
                }
            }
        }
        sec
    }

    fn section_diff(a: &ModeSection, b: &ModeSection) -> f64 {
        let mut d = a.clone();
        d.add_scaled(b, NEG).unwrap();
        d.norm()
    }

    #[test]
    fn extend_rejects_hidden_negative_modes_and_round_trips() {
        let s = flat(8);
        let mut stack = ModeStack::new(s.clone());
        stack.insert(ModeSection::constant(s.clone(), 0, ONE).unwrap()).unwrap();
        stack.insert(ModeSection::zero(s.clone(), -2).unwrap()).unwrap();
        let h = TwistorSeries::extend(&stack, 0).unwrap();
        assert_eq!(h.m(), 0);
        assert_eq!(h.len(), 1);
        let back = h.trace();
        assert_eq!(back.get(0).unwrap().coeffs(), stack.get(0).unwrap().coeffs());

        let mut bad = ModeStack::new(s.clone());
        bad.insert(ModeSection::constant(s.clone(), -1, ONE).unwrap()).unwrap();
        let Err(err) = TwistorSeries::extend(&bad, 0) else {
            panic!("negative mode accepted");
        };
        assert!(matches!(err, GtlError::NegativeModesPresent { m: 0, k: -1 }));
    }

    #[test]
    fn bounded_and_growing_series_have_expected_radial_profiles() {
        let s = flat(4);

        // summable coefficients: sups stay below the series' total mass
        let cs: Vec<f64> = (0..=40).map(|k| 0.5f64.powi(k)).collect();
        let h = const_series(&s, 0, &cs);
        let report = trace_and_growth(&h, &default_radii(h.len()), 0).unwrap();
        assert!(report.p_radial.abs() < 0.25, "p_radial={}", report.p_radial);
        for &(_, ln_sup) in &report.radial_points {
            assert!(ln_sup.exp() < 2.0);
        }

        // unit coefficients: first-order pole at the boundary
        let h = const_series(&s, 0, &vec![1.0; 41]);
        let report = trace_and_growth(&h, &default_radii(h.len()), 0).unwrap();
        assert!((report.p_radial - 1.0).abs() < 0.25, "p_radial={}", report.p_radial);
        assert!(report.p_modes.abs() < 0.05);
        assert!(report.pass);

        // the constant series is flat in every diagnostic
        let h = TwistorSeries::unit(s.clone()).unwrap();
        let report = trace_and_growth(&h, &default_radii(h.len()), 0).unwrap();
        assert!(report.p_radial.abs() < 1e-12);
        assert!(report.p_modes.abs() < 1e-12);
        assert!(report.pass);

        let Err(err) = h.radial_sup(1.0, 0) else { panic!("radius 1 accepted") };
        assert!(matches!(err, GtlError::RadiusOutOfRange(_)));
    }

    #[test]
    fn planted_growth_exponents_verify_within_slack() {
        let s = flat(4);
        for p in 0..=3 {
            let cs: Vec<f64> =
                (0..=128).map(|k| ((k * k + 1) as f64).sqrt().powi(p)).collect();
            let h = const_series(&s, 0, &cs);
            let report = trace_and_growth(&h, &default_radii(h.len()), 0).unwrap();
            assert!(
                (report.p_modes - p as f64).abs() < 0.01,
                "p={p} p_modes={}",
                report.p_modes
            );
            assert!(
                report.p_radial >= p as f64 - 0.5 && report.p_radial <= p as f64 + 1.5,
                "p={p} p_radial={}",
                report.p_radial
            );
            assert!(report.pass, "p={p}");
        }
    }

    #[test]
    fn holomorphy_residuals_certify_invariant_series() {
        let s = flat(8);
        let cs: Vec<f64> = (0..=10).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let h = const_series(&s, 0, &cs);
        let report = h.holomorphy_residual().unwrap();
        assert!(report.certified);
        assert!(report.max_residual < 1e-12);
        assert_eq!(report.residuals.len(), 13);
    }

    #[test]
    fn perturbed_mode_localizes_holomorphy_failure() {
        let s = flat(8);
        let mut stack = const_series(&s, 0, &vec![1.0; 11]).trace();
        let mut bump = stack.get(5).unwrap().clone();
        bump.add_scaled(&wave_section(&s, 5, [2, 1], Complex64::new(0.3, 0.1)), ONE).unwrap();
        stack.insert(bump).unwrap();
        let h = TwistorSeries::extend(&stack, 0).unwrap();
        let report = h.holomorphy_residual().unwrap();
        assert!(!report.certified);
        for &(k, r) in &report.residuals {
            if k == 5 || k == 7 {
                assert!(r > 1e-3, "k={k} r={r}");
            } else {
                assert!(r < 1e-12, "k={k} r={r}");
            }
        }
    }

    #[test]
    fn sphere_constant_series_is_certified() {
        let s = sphere(6);
        let mut stack = ModeStack::new(s.clone());
        stack.insert(ModeSection::constant(s.clone(), 0, ONE).unwrap()).unwrap();
        let h = TwistorSeries::extend(&stack, 0).unwrap();
        let report = h.holomorphy_residual().unwrap();
        assert!(report.certified);
        assert!(report.max_residual < 1e-14);
    }

    #[test]
    fn unit_law_and_hand_cauchy_product() {
        let s = flat(16);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut stack = ModeStack::new(s.clone());
        for k in 0..=5 {
            stack.insert(trimmed_random(&s, k, 2.0, &mut rng)).unwrap();
        }
        let h = TwistorSeries::extend(&stack, 0).unwrap();
        let e = TwistorSeries::unit(s.clone()).unwrap();
        let eh = e.product(&h).unwrap();
        assert_eq!(eh.m(), 0);
        for k in 0..=5 {
            let rel = section_diff(eh.get(k).unwrap(), h.get(k).unwrap())
                / h.get(k).unwrap().norm();
            assert!(rel < 1e-13, "k={k} rel={rel}");
        }

        // single-mode square: only the doubled degree survives
        let c = Complex64::new(0.5, 0.25);
        let mut single = ModeStack::new(s.clone());
        single.insert(ModeSection::constant(s.clone(), 1, c).unwrap()).unwrap();
        let g = TwistorSeries::extend(&single, 0).unwrap();
        let gg = g.product(&g).unwrap();
        assert_eq!(gg.len(), 1);
        let expect = ModeSection::constant(s.clone(), 2, c * c).unwrap();
        assert!(section_diff(gg.get(2).unwrap(), &expect) < 1e-13);
    }

    #[test]
    fn product_associativity_within_rounding() {
        let s = flat(16);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut series = Vec::new();
        for _ in 0..3 {
            let mut stack = ModeStack::new(s.clone());
            for k in 0..=3 {
                stack.insert(trimmed_random(&s, k, 2.0, &mut rng)).unwrap();
            }
            series.push(TwistorSeries::extend(&stack, 0).unwrap());
        }
        let left = series[0].product(&series[1]).unwrap().product(&series[2]).unwrap();
        let right = series[0].product(&series[1].product(&series[2]).unwrap()).unwrap();
        let scale = left.trace().total_l2();
        for k in 0..=9 {
            let (Some(a), Some(b)) = (left.get(k), right.get(k)) else { continue };
            assert!(section_diff(a, b) < 1e-13 * scale, "k={k}");
        }
    }

    #[test]
    fn invariant_product_closure() {
        let s = flat(8);
        let h1 = const_series(&s, 0, &[1.0, 0.5, 0.25, 0.125]);
        let h2 = const_series(&s, 0, &[0.3, -0.2, 0.7]);
        let prod = h1.product(&h2).unwrap();
        let report = prod.holomorphy_residual().unwrap();
        assert!(report.certified);
        assert!(report.max_residual < 1e-12);
    }

    #[test]
    fn dolbeault_squares_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // the conformal band leaves enough headroom for two eta applications
        for s in [flat(8), sphere(6), conformal(32)] {
            for p in 0..=2u8 {
                let mut entries = Vec::new();
                for _ in 0..choose2(p) {
                    let mut field = CoefficientField::new(s.clone(), p as i32);
                    for a in 0..=2u32 {
                        for b in 0..=2u32 {
                            let k = p as i32 + a as i32 - b as i32;
                            field.set_term(a, b, trimmed_random(&s, k, 5.0, &mut rng)).unwrap();
                        }
                    }
                    entries.push(field);
                }
                let t = DolbeaultTuple::new(p, 0, entries).unwrap();
                let dd = t.d().unwrap().d().unwrap();
                assert_eq!(dd.q(), 2);
                assert!(
                    dd.norm() <= 1e-12 * (1.0 + t.norm()),
                    "{} p={p} dd={}",
                    s.kind(),
                    dd.norm()
                );
            }
        }

        // constants are annihilated on the flat torus, exactly
        let s = flat(8);
        let mut field = CoefficientField::new(s.clone(), 0);
        field.set_term(0, 0, ModeSection::constant(s.clone(), 0, ONE).unwrap()).unwrap();
        let t = DolbeaultTuple::new(0, 0, vec![field]).unwrap();
        assert_eq!(t.d().unwrap().norm(), 0.0);

        // the complex stops at q = 2
        let top = t.d().unwrap().d().unwrap();
        let Err(err) = top.d() else { panic!("d at q=2 accepted") };
        assert!(matches!(err, GtlError::InvalidBidegree { p: 0, q: 2 }));

        // tuple shape is validated
        let Err(err) = DolbeaultTuple::new(1, 0, vec![CoefficientField::new(s, 1)]) else {
            panic!("short tuple accepted");
        };
        assert!(matches!(err, GtlError::InvalidBidegree { p: 1, q: 0 }));
    }

    #[test]
    fn dbar_solver_is_exact_inverse() {
        let s = flat(8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = CoefficientField::random(s.clone(), 1, 2, 3, &mut rng).unwrap();
        let g = dbar_omega_solve(&f);
        assert_eq!(g.weight(), 2);
        let back = g.dbar_fiber();
        for (&(a, b), sec) in f.iter() {
            assert_eq!(back.term(a, b).unwrap().coeffs(), sec.coeffs(), "a={a} b={b}");
        }

        // pure-w fields are exactly the kernel of the fiber derivative
        let series = const_series(&s, 2, &[1.0, -0.5, 0.25]);
        assert!(series.as_field().dbar_fiber().is_empty());
        let mut shifted = g.clone();
        shifted.add_scaled(&series.as_field(), ONE).unwrap();
        let back = shifted.dbar_fiber();
        for (&(a, b), sec) in f.iter() {
            assert_eq!(back.term(a, b).unwrap().coeffs(), sec.coeffs(), "a={a} b={b}");
        }

        // single-term example: the antiderivative of a base function is that
        // function times wbar
        let mut single = CoefficientField::new(s.clone(), 0);
        single.set_term(0, 0, ModeSection::constant(s.clone(), 0, ONE).unwrap()).unwrap();
        let g = dbar_omega_solve(&single);
        assert_eq!(g.weight(), 1);
        assert_eq!(g.term(0, 1).unwrap().coeffs(), single.term(0, 0).unwrap().coeffs());
    }

    #[test]
    fn obstruction_flags_constant_and_oscillating_sources() {
        let s = flat(8);
        let zero = ModeStack::new(s.clone());
        let report = bundle_obstruction(&zero).unwrap();
        assert_eq!(report.period, Complex64::default());
        assert_eq!(report.integral, Complex64::default());
        assert!(report.integral_vanishes);
        assert_eq!(report.class_vanishes, Some(true));

        // constant degree-0 source: the integral is the constant
        let c = Complex64::new(0.7, 0.2);
        let mut stack = ModeStack::new(s.clone());
        stack.insert(ModeSection::constant(s.clone(), 0, c).unwrap()).unwrap();
        let report = bundle_obstruction(&stack).unwrap();
        assert!((report.integral - c).norm() < 1e-12);
        assert!(!report.integral_vanishes);

        // oscillating source integrates to zero
        let mut stack = ModeStack::new(s.clone());
        let mut cos = wave_section(&s, 0, [1, 0], Complex64::new(0.5, 0.0));
        cos.add_scaled(&wave_section(&s, 0, [-1, 0], Complex64::new(0.5, 0.0)), ONE).unwrap();
        stack.insert(cos).unwrap();
        let report = bundle_obstruction(&stack).unwrap();
        assert!(report.integral.norm() < 1e-12);
        assert!(report.integral_vanishes);

        // a period on the pullback lattice reduces to zero; off-lattice does not
        let pi = std::f64::consts::PI;
        let mut stack = ModeStack::new(s.clone());
        stack
            .insert(ModeSection::constant(s.clone(), -1, Complex64::new(0.0, pi)).unwrap())
            .unwrap();
        let report = bundle_obstruction(&stack).unwrap();
        assert!((report.period - Complex64::new(0.0, pi)).norm() < 1e-12);
        assert_eq!(report.class_vanishes, Some(true));
        assert!(report.period_reduced.unwrap().norm() < 1e-12);

        let mut stack = ModeStack::new(s.clone());
        stack
            .insert(ModeSection::constant(s.clone(), -1, Complex64::new(pi / 2.0, 0.0)).unwrap())
            .unwrap();
        let report = bundle_obstruction(&stack).unwrap();
        assert_eq!(report.class_vanishes, Some(false));

        // guards: only flat tori, and nothing below degree -1
        let Err(err) = bundle_obstruction(&ModeStack::new(sphere(4))) else {
            panic!("sphere accepted");
        };
        assert!(matches!(err, GtlError::UnsupportedSurface { .. }));
        let mut stack = ModeStack::new(s.clone());
        stack.insert(ModeSection::constant(s.clone(), -2, ONE).unwrap()).unwrap();
        let Err(err) = bundle_obstruction(&stack) else { panic!("deep mode accepted") };
        assert!(matches!(err, GtlError::ModesBelowMinusOne { k: -2 }));

        // general lattices report the raw period only
        let skew = build_surface(&SurfaceConfig::FlatTorus {
            resolution: 8,
            lattice: Some([[1.0, 0.0], [0.3, 1.0]]),
        })
        .unwrap();
        let report = bundle_obstruction(&ModeStack::new(skew)).unwrap();
        assert!(report.period_reduced.is_none());
        assert!(report.class_vanishes.is_none());
    }

    #[test]
    fn gauge_pullback_matches_exponential_derivative() {
        let s = flat(8);
        let psi = wave_section(&s, 0, [1, 0], ONE);
        let pull = gauge_pullback(&psi).unwrap();
        let pi = std::f64::consts::PI;
        for k in [-1i32, 1] {
            let expect = ModeSection::constant(s.clone(), k, Complex64::new(0.0, pi)).unwrap();
            assert!(section_diff(pull.get(k).unwrap(), &expect) < 1e-12, "k={k}");
        }
    }

    #[test]
    fn gauge_residual_certifies_planted_and_catches_vanishing() {
        let s = flat(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        // planted: a := Xw - psi^-1 X psi gives an exact certificate. The
        // gauge sits close to 1 so its reciprocal's band truncation stays
        // inside the multiply tail guard.
        let wide = flat(16);
        let mut psi = ModeSection::constant(wide.clone(), 0, ONE).unwrap();
        psi.add_scaled(&wave_section(&wide, 0, [1, 1], Complex64::new(0.03, 0.015)), ONE)
            .unwrap();
        let mut w = ModeStack::new(wide.clone());
        for k in 0..=2 {
            w.insert(trimmed_random(&wide, k, 2.0, &mut rng)).unwrap();
        }
        let mut a = apply(&GeometricOp::X, &w).unwrap();
        a.add_scaled_stack(&gauge_pullback(&psi).unwrap(), NEG).unwrap();
        assert!(gauge_residual(&a, &psi, &w).unwrap() < 1e-14);

        // exponential connection: certificate gauge is the inverse exponential
        let a = gauge_pullback(&wave_section(&s, 0, [1, 0], ONE)).unwrap();
        let psi_inv = wave_section(&s, 0, [-1, 0], ONE);
        let zero = ModeStack::new(s.clone());
        assert!(gauge_residual(&a, &psi_inv, &zero).unwrap() < 1e-12);

        // trivial data: residual is the transport norm of w
        let one = ModeSection::constant(s.clone(), 0, ONE).unwrap();
        let mut inv = ModeStack::new(s.clone());
        inv.insert(ModeSection::constant(s.clone(), 1, Complex64::new(0.4, -0.1)).unwrap())
            .unwrap();
        assert!(gauge_residual(&ModeStack::new(s.clone()), &one, &inv).unwrap() < 1e-14);

        // guards: vanishing gauge and negative modes in w
        let mut cos = wave_section(&s, 0, [1, 0], Complex64::new(0.5, 0.0));
        cos.add_scaled(&wave_section(&s, 0, [-1, 0], Complex64::new(0.5, 0.0)), ONE).unwrap();
        let Err(err) = gauge_residual(&zero, &cos, &ModeStack::new(s.clone())) else {
            panic!("vanishing gauge accepted");
        };
        assert!(matches!(err, GtlError::PsiVanishes { .. }));

        let mut bad = ModeStack::new(s.clone());
        bad.insert(ModeSection::constant(s.clone(), -1, ONE).unwrap()).unwrap();
        let Err(err) = gauge_residual(&zero, &one, &bad) else {
            panic!("negative modes accepted");
        };
        assert!(matches!(err, GtlError::NegativeModesPresent { .. }));
    }

    #[test]
    fn series_and_tuple_jsonl_round_trip() {
        let s = flat(8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut stack = ModeStack::new(s.clone());
        for k in 1..=4 {
            stack.insert(ModeSection::random(s.clone(), k, &mut rng).unwrap()).unwrap();
        }
        let h = TwistorSeries::extend(&stack, 1).unwrap();
        let mut buf = Vec::new();
        write_series_jsonl(&h, &mut buf).unwrap();
        let back = read_series_jsonl(&s, buf.as_slice()).unwrap();
        assert_eq!(back.m(), 1);
        for k in 1..=4 {
            assert_eq!(back.get(k).unwrap().coeffs(), h.get(k).unwrap().coeffs());
        }
        let Err(err) = read_series_jsonl(&sphere(4), buf.as_slice()) else {
            panic!("basis mismatch accepted");
        };
        assert!(matches!(err, GtlError::SurfaceMismatch));

        let t = DolbeaultTuple::random(s.clone(), 1, 1, 2, 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_tuple_jsonl(&t, &mut buf).unwrap();
        let back = read_tuple_jsonl(&s, buf.as_slice()).unwrap();
        assert_eq!((back.p(), back.q()), (1, 1));
        assert_eq!(back.entries().len(), 4);
        for (slot, field) in t.entries().iter().enumerate() {
            for (&(a, b), sec) in field.iter() {
                assert_eq!(
                    back.entries()[slot].term(a, b).unwrap().coeffs(),
                    sec.coeffs(),
                    "slot={slot} a={a} b={b}"
                );
            }
        }
    }
}

//! Vertical Fourier modes of functions on the unit tangent bundle.
//!
//! A function on SM restricts on each fiber circle to a Fourier series in the
//! fiber angle; the degree-k piece is a section of the k-th vertical
//! eigenbundle, stored as a [`ModeSection`]. A [`ModeStack`] is a finite
//! collection of such sections over one surface, the working representation
//! of a (truncated) function on SM. Operations that can lose modes report the
//! discarded tail mass instead of dropping it silently.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::{Array3, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};
use crate::geometry::{fft_inplace, Surface};

/// One vertical Fourier mode: a degree-k section in backend coefficients.
#[derive(Clone)]
pub struct ModeSection {
    surface: Arc<Surface>,
    k: i32,
    coeffs: Vec<Complex64>,
}

impl ModeSection {
    pub fn new(surface: Arc<Surface>, k: i32, coeffs: Vec<Complex64>) -> Result<Self> {
        let want = surface.section_len(k)?;
        if coeffs.len() != want {
            return Err(GtlError::CoefficientLength { k, got: coeffs.len(), want });
        }
        Ok(ModeSection { surface, k, coeffs })
    }

    pub fn zero(surface: Arc<Surface>, k: i32) -> Result<Self> {
        let coeffs = surface.zero_coeffs(k)?;
        Ok(ModeSection { surface, k, coeffs })
    }

    /// The constant base function c as a degree-k section. Fails on backends
    /// whose degree-k layout differs from the degree-0 one (round sphere with
    /// k != 0): constants are not a single slot there.
    pub fn constant(surface: Arc<Surface>, k: i32, c: Complex64) -> Result<Self> {
        let mut coeffs = surface.one_coeffs();
        for v in &mut coeffs {
            *v *= c;
        }
        ModeSection::new(surface, k, coeffs)
    }

    /// Independent standard Gaussians in every coefficient slot.
    pub fn random<R: Rng>(surface: Arc<Surface>, k: i32, rng: &mut R) -> Result<Self> {
        let len = surface.section_len(k)?;
        let coeffs = (0..len)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        Ok(ModeSection { surface, k, coeffs })
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn k(&self) -> i32 {
        self.k
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.surface.norm(self.k, &self.coeffs).expect("validated length")
    }

    pub fn hs_norm(&self, s: f64) -> f64 {
        self.surface.hs_norm(self.k, &self.coeffs, s).expect("validated length")
    }

    pub fn inner(&self, other: &ModeSection) -> Result<Complex64> {
        self.surface.ensure_same(&other.surface)?;
        if self.k != other.k {
            return Ok(Complex64::default());
        }
        self.surface.inner(self.k, &self.coeffs, &other.coeffs)
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.coeffs {
            *v *= c;
        }
    }

    /// self += c * other (same surface and degree required).
    pub fn add_scaled(&mut self, other: &ModeSection, c: Complex64) -> Result<()> {
        self.surface.ensure_same(&other.surface)?;
        if self.k != other.k {
            return Err(GtlError::CoefficientLength {
                k: other.k,
                got: other.coeffs.len(),
                want: self.coeffs.len(),
            });
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }
}

/// A finite stack of vertical modes over one surface.
#[derive(Clone)]
pub struct ModeStack {
    surface: Arc<Surface>,
    sections: BTreeMap<i32, ModeSection>,
}

impl ModeStack {
    pub fn new(surface: Arc<Surface>) -> Self {
        ModeStack { surface, sections: BTreeMap::new() }
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn insert(&mut self, section: ModeSection) -> Result<()> {
        self.surface.ensure_same(&section.surface)?;
        self.sections.insert(section.k, section);
        Ok(())
    }

    pub fn get(&self, k: i32) -> Option<&ModeSection> {
        self.sections.get(&k)
    }

    /// Coefficients of mode k, or zeros when the mode is absent.
    pub fn coeffs_or_zero(&self, k: i32) -> Result<Vec<Complex64>> {
        match self.sections.get(&k) {
            Some(s) => Ok(s.coeffs.clone()),
            None => self.surface.zero_coeffs(k),
        }
    }

    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        self.sections.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&i32, &ModeSection)> {
        self.sections.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn kmin(&self) -> Option<i32> {
        self.sections.keys().next().copied()
    }

    pub fn kmax(&self) -> Option<i32> {
        self.sections.keys().next_back().copied()
    }

    /// Stacks with no negative modes are fiberwise holomorphic.
    pub fn is_fiberwise_holomorphic(&self) -> bool {
        self.kmin().map_or(true, |k| k >= 0)
    }

    /// Total L^2(SM) norm by mode orthogonality.
    pub fn total_l2(&self) -> f64 {
        self.sections
            .values()
            .map(|s| s.norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Multiply every mode by c.
    pub fn scale(&mut self, c: Complex64) {
        for sec in self.sections.values_mut() {
            sec.scale(c);
        }
    }

    /// self += section, inserting the degree when absent.
    pub fn accumulate(&mut self, section: ModeSection) -> Result<()> {
        self.surface.ensure_same(&section.surface)?;
        match self.sections.get_mut(&section.k) {
            Some(mine) => mine.add_scaled(&section, Complex64::new(1.0, 0.0)),
            None => {
                self.sections.insert(section.k, section);
                Ok(())
            }
        }
    }

    /// self += c * other, inserting modes absent from self.
    pub fn add_scaled_stack(&mut self, other: &ModeStack, c: Complex64) -> Result<()> {
        self.surface.ensure_same(&other.surface)?;
        for (&k, sec) in other.iter() {
            match self.sections.get_mut(&k) {
                Some(mine) => mine.add_scaled(sec, c)?,
                None => {
                    let mut s = sec.clone();
                    s.scale(c);
                    self.sections.insert(k, s);
                }
            }
        }
        Ok(())
    }

    /// Independent Gaussian modes for kmin..=kmax.
    pub fn random<R: Rng>(
        surface: Arc<Surface>,
        kmin: i32,
        kmax: i32,
        rng: &mut R,
    ) -> Result<Self> {
        let mut stack = ModeStack::new(surface.clone());
        for k in kmin..=kmax {
            stack.insert(ModeSection::random(surface.clone(), k, rng)?)?;
        }
        Ok(stack)
    }

    /// Values on the base grid x uniform fiber angles (layout: base rows,
    /// base cols, fiber).
    pub fn synthesize(&self, thetas: &[f64]) -> Result<Array3<Complex64>> {
        let (n1, n2) = self.surface.grid_shape();
        let mut out = Array3::default((n1, n2, thetas.len()));
        for section in self.sections.values() {
            let grid = self.surface.values(section.k, &section.coeffs)?;
            for (t, &theta) in thetas.iter().enumerate() {
                let phase = Complex64::new(0.0, section.k as f64 * theta).exp();
                for i in 0..n1 {
                    for j in 0..n2 {
                        out[[i, j, t]] += grid[[i, j]] * phase;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Evenly spaced fiber angles `2 pi t / m`.
pub fn uniform_fiber_grid(m: usize) -> Vec<f64> {
    (0..m).map(|t| std::f64::consts::TAU * t as f64 / m as f64).collect()
}

/// Split SM samples (base grid x fiber circle) into vertical modes
/// -kmax..=kmax. Returns the stack and the L^2 mass discarded beyond kmax
/// (flat-measure estimate on the sample grid). The fiber grid must be
/// uniformly spaced; an overall angular offset is allowed.
pub fn decompose(
    surface: &Arc<Surface>,
    samples: &Array3<Complex64>,
    thetas: &[f64],
    kmax: usize,
) -> Result<(ModeStack, f64)> {
    let m = thetas.len();
    let need = 2 * kmax + 1;
    if m < need {
        return Err(GtlError::ThetaGridTooSmall { n_theta: m, kmax: kmax as i32, need });
    }
    let step = std::f64::consts::TAU / m as f64;
    let mut max_dev = 0.0_f64;
    for (t, &theta) in thetas.iter().enumerate() {
        let expect = thetas[0] + step * t as f64;
        let dev = (theta - expect).rem_euclid(std::f64::consts::TAU);
        max_dev = max_dev.max(dev.min(std::f64::consts::TAU - dev));
    }
    if max_dev > 1e-9 {
        return Err(GtlError::NonUniformGrid { max_dev });
    }
    let (n1, n2) = surface.grid_shape();
    if samples.dim() != (n1, n2, m) {
        return Err(GtlError::ResolutionTooSmall(samples.dim().0, samples.dim().1));
    }

    // fiber DFT at every base point
    let mut hat = samples.clone();
    let mut buf = vec![Complex64::default(); m];
    for i in 0..n1 {
        for j in 0..n2 {
            for t in 0..m {
                buf[t] = hat[[i, j, t]];
            }
            fft_inplace(&mut buf, false);
            for t in 0..m {
                hat[[i, j, t]] = buf[t] / m as f64;
            }
        }
    }

    let theta0 = thetas[0];
    let mut stack = ModeStack::new(surface.clone());
    let mut tail_sq = 0.0;
    let half = m / 2;
    for slot in 0..m {
        let k = if slot <= half { slot as i32 } else { slot as i32 - m as i32 };
        let plane = hat.index_axis(Axis(2), slot);
        if k.unsigned_abs() as usize <= kmax {
            // undo the offset phase: coefficients were measured against
            // exp(i k (theta - theta0))
            let phase = Complex64::new(0.0, -(k as f64) * theta0).exp();
            let grid = plane.mapv(|v| v * phase);
            let coeffs = surface.analyze(k, &grid)?;
            stack.insert(ModeSection::new(surface.clone(), k, coeffs)?)?;
        } else {
            let mass: f64 = plane.iter().map(|v| v.norm_sqr()).sum();
            tail_sq += mass / (n1 * n2) as f64
                * surface.area()
                * std::f64::consts::TAU;
        }
    }
    Ok((stack, tail_sq.sqrt()))
}

/// Fiberwise holomorphic projection: drop every mode of negative degree.
/// Returns the projected stack and the discarded L^2 mass.
pub fn szego(stack: &ModeStack) -> (ModeStack, f64) {
    let mut out = ModeStack::new(stack.surface.clone());
    let mut dropped_sq = 0.0;
    for (&k, section) in stack.iter() {
        if k >= 0 {
            out.sections.insert(k, section.clone());
        } else {
            dropped_sq += section.norm().powi(2);
        }
    }
    (out, dropped_sq.sqrt())
}

/// Least-squares fit of `log norm` against `log <k>`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope: norms behave like `<k>^exponent` (negative means decay).
    pub exponent: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    /// Number of modes entering the fit.
    pub points: usize,
}

/// Fit `norms[i] ~ <ks[i]>^p` in log-log space; `None` below two usable points.
pub fn fit_decay_exponent(ks: &[i32], norms: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(norms)
        .filter(|(k, n)| k.abs() >= 2 && **n > 0.0)
        .map(|(k, n)| {
            let kk = ((k * k + 1) as f64).sqrt();
            (kk.ln(), n.ln())
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let rss: f64 = pts
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Some(DecayFit {
        exponent: slope,
        residual: (rss / n).sqrt(),
        points: pts.len(),
    })
}

/// Per-mode and total norms plus the algebraic decay/growth diagnostic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeNorms {
    pub s: f64,
    /// k -> (L^2 norm, H^s norm), in degree order.
    pub per_mode: BTreeMap<i32, (f64, f64)>,
    pub total_l2: f64,
    pub total_hs: f64,
    pub fit: Option<DecayFit>,
}

/// Norms of every stored mode and a decay-exponent fit over |k| >= 2.
pub fn mode_norms(stack: &ModeStack, s: f64) -> Result<ModeNorms> {
    if stack.is_empty() {
        return Err(GtlError::EmptyStack);
    }
    let mut per_mode = BTreeMap::new();
    let mut sum_l2 = 0.0;
    let mut sum_hs = 0.0;
    let mut ks = Vec::new();
    let mut l2s = Vec::new();
    for (&k, section) in stack.iter() {
        let l2 = section.norm();
        let hs = section.hs_norm(s);
        per_mode.insert(k, (l2, hs));
        sum_l2 += l2 * l2;
        sum_hs += hs * hs;
        ks.push(k);
        l2s.push(l2);
    }
    Ok(ModeNorms {
        s,
        per_mode,
        total_l2: sum_l2.sqrt(),
        total_hs: sum_hs.sqrt(),
        fit: fit_decay_exponent(&ks, &l2s),
    })
}

#[derive(Serialize, Deserialize)]
struct ModeRecord {
    k: i32,
    basis_id: String,
    coefficients: Vec<(f64, f64)>,
}

/// Serialize a stack as JSON lines, one record per mode in degree order.
pub fn write_stack_jsonl<W: Write>(stack: &ModeStack, mut w: W) -> Result<()> {
    for (&k, section) in stack.iter() {
        let record = ModeRecord {
            k,
            basis_id: stack.surface.label().to_string(),
            coefficients: section.coeffs.iter().map(|c| (c.re, c.im)).collect(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| GtlError::Deserialize(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| GtlError::Deserialize(e.to_string()))?;
    }
    Ok(())
}

/// Read a stack written by [`write_stack_jsonl`]; records must match the
/// surface's basis identity.
pub fn read_stack_jsonl<R: BufRead>(surface: &Arc<Surface>, r: R) -> Result<ModeStack> {
    let mut stack = ModeStack::new(surface.clone());
    for line in r.lines() {
        let line = line.map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ModeRecord =
            serde_json::from_str(&line).map_err(|e| GtlError::Deserialize(e.to_string()))?;
        if record.basis_id != surface.label() {
            return Err(GtlError::SurfaceMismatch);
        }
        let coeffs = record
            .coefficients
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        stack.insert(ModeSection::new(surface.clone(), record.k, coeffs)?)?;
    }
    Ok(stack)
}

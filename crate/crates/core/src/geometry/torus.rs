//! Torus backends (flat and conformally flat).
//!
//! The base is R^2 / lattice with generators `a1`, `a2`; coefficients live on
//! the Fourier box `|n_i| <= B_i = N_i/2 - 1` (the unpaired Nyquist row of the
//! even grid is excluded so the layout is unambiguous). The metric is
//! `e^{2 lambda} (dx^2 + dy^2)` in Cartesian coordinates with `lambda` a real
//! band-limited field; the flat torus is `lambda = 0`.
//!
//! In the fiber-angle trivialization attached to the isothermal frame, the
//! raising/lowering operators act on a degree-k component function as
//!
//! ```text
//! eta+ : u  ->  e^{-lambda} (del u      - k (del lambda)     u)
//! eta- : u  ->  e^{-lambda} (del-bar u  + k (del-bar lambda) u)
//! ```
//!
//! with `del = (d/dx - i d/dy)/2`, and the Gauss curvature is
//! `K = -e^{-2 lambda} (flat Laplacian of lambda)`, evaluated spectrally.
//!
//! Quadrature, pointwise products, and the analytic factors `e^{+-lambda}`
//! are applied on a 2x-oversampled grid: products of two in-band factors stay
//! strictly below its Nyquist frequency, so integrals and product
//! coefficients are exact to roundoff, while the entire-function tails of
//! `e^{+-lambda}` fall far below the 1e-12 quadrature contract. Results are
//! measured before projecting back to the stored band; an operation that
//! would discard more than a 1e-10 relative tail reports `BandLimitExceeded`
//! instead of silently aliasing.

use ndarray::Array2;
use num_complex::Complex64;

use super::spectral::fft2_inplace;
use crate::error::{GtlError, Result};

/// Relative spectral mass beyond the stored band above which an operation
/// refuses to truncate.
pub(crate) const TAIL_GUARD: f64 = 1e-10;

/// Threshold used by degenerate-lattice detection.
const DET_EPS: f64 = 1e-12;

pub(crate) struct TorusGeometry {
    n: (usize, usize),
    band: (usize, usize),
    /// generator rows a1, a2 (Cartesian components)
    lattice: [[f64; 2]; 2],
    /// dual rows b1, b2 with b_i . a_j = delta_ij
    dual: [[f64; 2]; 2],
    flat_area: f64,
    area: f64,
    pub(crate) is_flat: bool,
    /// conformal exponent coefficients on the band box
    lambda: Vec<Complex64>,
    // cached node data
    e2l_over: Array2<f64>,
    eml_over: Array2<f64>,
    dlam_over: Array2<Complex64>,
    dblam_over: Array2<Complex64>,
    curv_base: Array2<f64>,
    curv_coeffs: Vec<Complex64>,
}

impl TorusGeometry {
    pub fn new(
        n: (usize, usize),
        lattice: Option<[[f64; 2]; 2]>,
        lambda_waves: &[((i32, i32), Complex64)],
    ) -> Result<Self> {
        if n.0 < 4 || n.1 < 4 || n.0 % 2 != 0 || n.1 % 2 != 0 {
            return Err(GtlError::ResolutionTooSmall(n.0, n.1));
        }
        let lattice = lattice.unwrap_or([[1.0, 0.0], [0.0, 1.0]]);
        let det = lattice[0][0] * lattice[1][1] - lattice[0][1] * lattice[1][0];
        let scale = (lattice[0][0].hypot(lattice[0][1])) * (lattice[1][0].hypot(lattice[1][1]));
        if det.abs() <= DET_EPS * scale.max(1.0) {
            return Err(GtlError::DegenerateLattice { det });
        }
        let dual = [
            [lattice[1][1] / det, -lattice[1][0] / det],
            [-lattice[0][1] / det, lattice[0][0] / det],
        ];
        let band = (n.0 / 2 - 1, n.1 / 2 - 1);
        let box_len = (2 * band.0 + 1) * (2 * band.1 + 1);

        let mut lambda = vec![Complex64::default(); box_len];
        for &((w1, w2), c) in lambda_waves {
            if w1.unsigned_abs() as usize > band.0 || w2.unsigned_abs() as usize > band.1 {
                return Err(GtlError::BandLimitExceeded {
                    support: w1.unsigned_abs().max(w2.unsigned_abs()) as usize,
                    band: band.0.min(band.1),
                });
            }
            let idx = (w1 + band.0 as i32) as usize * (2 * band.1 + 1)
                + (w2 + band.1 as i32) as usize;
            lambda[idx] += c;
        }
        let is_flat = lambda.iter().all(|c| c.norm() == 0.0);

        let mut geom = TorusGeometry {
            n,
            band,
            lattice,
            dual,
            flat_area: det.abs(),
            area: det.abs(),
            is_flat,
            lambda,
            e2l_over: Array2::zeros((1, 1)),
            eml_over: Array2::zeros((1, 1)),
            dlam_over: Array2::zeros((1, 1)),
            dblam_over: Array2::zeros((1, 1)),
            curv_base: Array2::zeros((1, 1)),
            curv_coeffs: vec![],
        };
        geom.build_caches()?;
        Ok(geom)
    }

    fn build_caches(&mut self) -> Result<()> {
        let over = (2 * self.n.0, 2 * self.n.1);
        let lam_vals = self.values_on(&self.lambda, over);
        let max_imag = lam_vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if max_imag > 1e-12 {
            return Err(GtlError::NonRealConformalFactor { max_imag });
        }
        let lam_re = lam_vals.mapv(|v| v.re);
        self.e2l_over = lam_re.mapv(|v| (2.0 * v).exp());
        self.eml_over = lam_re.mapv(|v| (-v).exp());
        self.dlam_over = self.values_on(&self.apply_multiplier(&self.lambda, Self::mult_del), over);
        self.dblam_over =
            self.values_on(&self.apply_multiplier(&self.lambda, Self::mult_delbar), over);

        // K = -e^{-2 lambda} * Delta lambda, spectral Laplacian
        let lap = self.apply_multiplier(&self.lambda, |q| {
            Complex64::new(-(q[0] * q[0] + q[1] * q[1]), 0.0)
        });
        let lap_base = self.values_on(&lap, self.n);
        let lam_base = self.values_on(&self.lambda, self.n);
        self.curv_base = Array2::from_shape_fn(self.n, |ij| {
            -(-2.0 * lam_base[ij].re).exp() * lap_base[ij].re
        });
        let lap_over = self.values_on(&lap, over);
        let mut curv_over = Array2::from_shape_fn(over, |ij| {
            -Complex64::new((-2.0 * lam_re[ij]).exp(), 0.0) * lap_over[ij]
        });
        fft2_inplace(&mut curv_over, false);
        let scale = 1.0 / (over.0 * over.1) as f64;
        curv_over.mapv_inplace(|v| v * scale);
        // the curvature of an in-band conformal exponent has an entire-function
        // tail; project without a guard (documented, far below tolerance)
        self.curv_coeffs = self.gather(&curv_over).0;

        self.area = self.flat_area * self.e2l_over.mean().unwrap();
        Ok(())
    }

    // ---- layout -----------------------------------------------------------

    pub fn n(&self) -> (usize, usize) {
        self.n
    }

    pub fn lattice(&self) -> [[f64; 2]; 2] {
        self.lattice
    }

    pub fn section_len(&self) -> usize {
        (2 * self.band.0 + 1) * (2 * self.band.1 + 1)
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn curvature_base(&self) -> &Array2<f64> {
        &self.curv_base
    }

    pub fn curvature_coeffs(&self) -> &[Complex64] {
        &self.curv_coeffs
    }

    /// Iterate box slots as (slot, n1, n2).
    fn slots(&self) -> impl Iterator<Item = (usize, i32, i32)> + '_ {
        let (b1, b2) = (self.band.0 as i32, self.band.1 as i32);
        (0..self.section_len()).map(move |s| {
            let w = (2 * b2 + 1) as usize;
            let n1 = (s / w) as i32 - b1;
            let n2 = (s % w) as i32 - b2;
            (s, n1, n2)
        })
    }

    /// Cartesian frequency vector of box slot (n1, n2).
    pub fn q(&self, n1: i32, n2: i32) -> [f64; 2] {
        let tau = std::f64::consts::TAU;
        [
            tau * (n1 as f64 * self.dual[0][0] + n2 as f64 * self.dual[1][0]),
            tau * (n1 as f64 * self.dual[0][1] + n2 as f64 * self.dual[1][1]),
        ]
    }

    /// Laplace multiplier per slot (H^s weight surrogate).
    pub fn mu_slots(&self) -> Vec<f64> {
        self.slots()
            .map(|(_, n1, n2)| {
                let q = self.q(n1, n2);
                q[0] * q[0] + q[1] * q[1]
            })
            .collect()
    }

    fn apply_multiplier(
        &self,
        coeffs: &[Complex64],
        f: impl Fn([f64; 2]) -> Complex64,
    ) -> Vec<Complex64> {
        self.slots()
            .map(|(s, n1, n2)| f(self.q(n1, n2)) * coeffs[s])
            .collect()
    }

    /// del = (d_x - i d_y)/2 acts on exp(i q.x) by (q_y + i q_x)/2.
    fn mult_del(q: [f64; 2]) -> Complex64 {
        Complex64::new(q[1], q[0]) * 0.5
    }

    /// del-bar = (d_x + i d_y)/2 acts by (-q_y + i q_x)/2.
    fn mult_delbar(q: [f64; 2]) -> Complex64 {
        Complex64::new(-q[1], q[0]) * 0.5
    }

    // ---- synthesis / analysis ----------------------------------------------

    /// Synthesize box coefficients on a grid of the given shape
    /// (unnormalized inverse FFT of the scattered spectrum).
    fn values_on(&self, coeffs: &[Complex64], shape: (usize, usize)) -> Array2<Complex64> {
        let mut g = Array2::default(shape);
        for (s, n1, n2) in self.slots() {
            let i = n1.rem_euclid(shape.0 as i32) as usize;
            let j = n2.rem_euclid(shape.1 as i32) as usize;
            g[[i, j]] = coeffs[s];
        }
        fft2_inplace(&mut g, true);
        g
    }

    pub fn synthesize_base(&self, coeffs: &[Complex64]) -> Array2<Complex64> {
        self.values_on(coeffs, self.n)
    }

    pub(crate) fn synthesize_over(&self, coeffs: &[Complex64]) -> Array2<Complex64> {
        self.values_on(coeffs, (2 * self.n.0, 2 * self.n.1))
    }

    /// Gather a normalized frequency grid into the band box; returns
    /// (coefficients, squared tail mass, squared total mass, max tail index).
    fn gather(&self, freq: &Array2<Complex64>) -> (Vec<Complex64>, f64, f64, usize) {
        let shape = freq.dim();
        let mut out = vec![Complex64::default(); self.section_len()];
        let (b1, b2) = (self.band.0 as i32, self.band.1 as i32);
        let mut tail = 0.0;
        let mut total = 0.0;
        let mut max_sup = 0usize;
        for i in 0..shape.0 {
            let n1 = if i <= shape.0 / 2 { i as i32 } else { i as i32 - shape.0 as i32 };
            for j in 0..shape.1 {
                let n2 = if j <= shape.1 / 2 { j as i32 } else { j as i32 - shape.1 as i32 };
                let m = freq[[i, j]].norm_sqr();
                total += m;
                if n1.abs() <= b1 && n2.abs() <= b2 {
                    let slot =
                        (n1 + b1) as usize * (2 * self.band.1 + 1) as usize + (n2 + b2) as usize;
                    out[slot] = freq[[i, j]];
                } else {
                    tail += m;
                    if m > 0.0 {
                        max_sup = max_sup.max(n1.unsigned_abs().max(n2.unsigned_abs()) as usize);
                    }
                }
            }
        }
        (out, tail, total, max_sup)
    }

    fn analyze_guarded(&self, mut values: Array2<Complex64>) -> Result<Vec<Complex64>> {
        let size = (values.dim().0 * values.dim().1) as f64;
        fft2_inplace(&mut values, false);
        values.mapv_inplace(|v| v / size);
        let (out, tail, total, sup) = self.gather(&values);
        if total > 0.0 && (tail / total).sqrt() > TAIL_GUARD {
            return Err(GtlError::BandLimitExceeded {
                support: sup,
                band: self.band.0.min(self.band.1),
            });
        }
        Ok(out)
    }

    /// Analyze base-grid values back to band coefficients; errors if the data
    /// carries significant mass outside the band (Nyquist row included).
    pub fn analyze_base(&self, values: &Array2<Complex64>) -> Result<Vec<Complex64>> {
        self.analyze_guarded(values.clone())
    }

    // ---- inner products and operators --------------------------------------

    /// L^2(SM) pairing of two same-degree component functions
    /// (Liouville factor 2*pi included).
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let tau = std::f64::consts::TAU;
        if self.is_flat {
            let dot: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            return dot * tau * self.flat_area;
        }
        let ga = self.synthesize_over(a);
        let gb = self.synthesize_over(b);
        let mut acc = Complex64::default();
        for ((x, y), w) in ga.iter().zip(gb.iter()).zip(self.e2l_over.iter()) {
            acc += x * y.conj() * *w;
        }
        acc / (ga.len() as f64) * tau * self.flat_area
    }

    fn eta_grid(&self, k: i32, coeffs: &[Complex64], raise: bool) -> Array2<Complex64> {
        let mult = if raise { Self::mult_del } else { Self::mult_delbar };
        let du = self.apply_multiplier(coeffs, mult);
        let g_du = self.synthesize_over(&du);
        let g_u = self.synthesize_over(coeffs);
        let kf = if raise { -(k as f64) } else { k as f64 };
        let dl = if raise { &self.dlam_over } else { &self.dblam_over };
        Array2::from_shape_fn(g_du.dim(), |ij| {
            self.eml_over[ij] * (g_du[ij] + kf * dl[ij] * g_u[ij])
        })
    }

    /// eta+ on a degree-k component; exact diagonal for the flat metric.
    pub fn eta_plus(&self, k: i32, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.is_flat {
            return Ok(self.apply_multiplier(coeffs, Self::mult_del));
        }
        self.analyze_guarded(self.eta_grid(k, coeffs, true))
    }

    /// eta- on a degree-k component.
    pub fn eta_minus(&self, k: i32, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.is_flat {
            return Ok(self.apply_multiplier(coeffs, Self::mult_delbar));
        }
        self.analyze_guarded(self.eta_grid(k, coeffs, false))
    }

    /// eta+- followed by band projection without the tail guard; used to
    /// discretize the operators as finite matrices.
    pub fn eta_projected(&self, k: i32, coeffs: &[Complex64], raise: bool) -> Vec<Complex64> {
        if self.is_flat {
            let mult = if raise { Self::mult_del } else { Self::mult_delbar };
            return self.apply_multiplier(coeffs, mult);
        }
        let mut vals = self.eta_grid(k, coeffs, raise);
        let size = (vals.dim().0 * vals.dim().1) as f64;
        fft2_inplace(&mut vals, false);
        vals.mapv_inplace(|v| v / size);
        self.gather(&vals).0
    }

    /// Pointwise product of two component functions (exact on the oversampled
    /// grid; the result must fit the band).
    pub fn multiply(&self, a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
        let ga = self.synthesize_over(a);
        let gb = self.synthesize_over(b);
        let prod = Array2::from_shape_fn(ga.dim(), |ij| ga[ij] * gb[ij]);
        self.analyze_guarded(prod)
    }

    /// Pointwise reciprocal of a nonvanishing degree-0 component. The exact
    /// reciprocal of a band-limited section is generally entire-band, so the
    /// result is its orthogonal projection onto the stored band (no tail
    /// guard); the discarded tail decays geometrically in the band size.
    pub fn reciprocal(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let g = self.synthesize_over(coeffs);
        let min_abs = g.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if min_abs < 1e-12 {
            return Err(GtlError::PsiVanishes { min_abs });
        }
        let mut inv = g.mapv(|v| v.finv());
        let size = (inv.dim().0 * inv.dim().1) as f64;
        fft2_inplace(&mut inv, false);
        inv.mapv_inplace(|v| v / size);
        Ok(self.gather(&inv).0)
    }

    /// Quadrature table on the (oversampled) grid: Cartesian nodes and
    /// measure weights that integrate in-band products exactly.
    pub fn quadrature(&self) -> (Vec<[f64; 2]>, Vec<f64>) {
        let shape = (2 * self.n.0, 2 * self.n.1);
        let w0 = self.flat_area / (shape.0 * shape.1) as f64;
        let mut nodes = Vec::with_capacity(shape.0 * shape.1);
        let mut weights = Vec::with_capacity(shape.0 * shape.1);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let xi = [i as f64 / shape.0 as f64, j as f64 / shape.1 as f64];
                nodes.push([
                    xi[0] * self.lattice[0][0] + xi[1] * self.lattice[1][0],
                    xi[0] * self.lattice[0][1] + xi[1] * self.lattice[1][1],
                ]);
                weights.push(w0 * self.e2l_over[[i, j]]);
            }
        }
        (nodes, weights)
    }

    /// Index of the constant-function slot.
    pub fn zero_frequency_slot(&self) -> usize {
        self.band.0 * (2 * self.band.1 + 1) + self.band.1
    }

    /// Mean of the component function over the flat fundamental domain
    /// (the zero-frequency coefficient).
    pub fn mean_coefficient(&self, coeffs: &[Complex64]) -> Complex64 {
        coeffs[self.zero_frequency_slot()]
    }

    /// Integral of a degree-0 component against the Riemannian area form.
    pub fn integral(&self, coeffs: &[Complex64]) -> Complex64 {
        if self.is_flat {
            return self.mean_coefficient(coeffs) * self.flat_area;
        }
        let g = self.synthesize_over(coeffs);
        let mut acc = Complex64::default();
        for (v, w) in g.iter().zip(self.e2l_over.iter()) {
            acc += v * *w;
        }
        acc / (g.len() as f64) * self.flat_area
    }

    /// Coefficients of the constant function 1.
    pub fn one_coeffs(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.section_len()];
        out[self.zero_frequency_slot()] = Complex64::new(1.0, 0.0);
        out
    }

    /// Cartesian frequency vector of every slot, in layout order.
    pub fn frequencies(&self) -> Vec<[f64; 2]> {
        self.slots().map(|(_, n1, n2)| self.q(n1, n2)).collect()
    }
}

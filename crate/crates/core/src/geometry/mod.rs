//! Surface backends and the common spectral interface.
//!
//! A [`Surface`] bundles a concrete background (flat torus, round sphere, or
//! conformally flat torus) behind one coefficient-space API. Degree-k
//! sections of the vertical eigenbundle are stored as packed coefficient
//! vectors in a backend-specific orthogonal family; every operator in the
//! crate goes through this interface, so the backends stay swappable.

mod sphere;
mod spectral;
mod torus;
mod wigner;

pub(crate) use spectral::fft_inplace;

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GtlError, Result};
use sphere::SphereGeometry;
use torus::TorusGeometry;

/// One plane-wave term of a conformal exponent on the torus,
/// `coeff * exp(2 pi i n . x)` in lattice coordinates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LambdaWave {
    pub n: [i32; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl LambdaWave {
    pub fn coeff(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Declarative surface description; deterministic label doubles as identity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceConfig {
    FlatTorus {
        resolution: usize,
        #[serde(default)]
        lattice: Option<[[f64; 2]; 2]>,
    },
    RoundSphere {
        lmax: usize,
    },
    ConformalTorus {
        resolution: usize,
        #[serde(default)]
        lattice: Option<[[f64; 2]; 2]>,
        waves: Vec<LambdaWave>,
    },
}

impl SurfaceConfig {
    pub fn unit_flat_torus(resolution: usize) -> Self {
        SurfaceConfig::FlatTorus { resolution, lattice: None }
    }

    pub fn round_sphere(lmax: usize) -> Self {
        SurfaceConfig::RoundSphere { lmax }
    }

    pub fn conformal_torus(resolution: usize, waves: Vec<LambdaWave>) -> Self {
        SurfaceConfig::ConformalTorus { resolution, lattice: None, waves }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    FlatTorus,
    RoundSphere,
    ConformalTorus,
}

impl SurfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceKind::FlatTorus => "flat_torus",
            SurfaceKind::RoundSphere => "round_sphere",
            SurfaceKind::ConformalTorus => "conformal_torus",
        }
    }
}

impl std::fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid quadrature exact for pairings of in-band sections: `nodes[i]` are
/// base-point coordinates (lattice coordinates on tori, colatitude/longitude
/// on the sphere) and `weights[i]` integrate the Riemannian area element.
#[derive(Clone, Debug)]
pub struct QuadratureTable {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureTable {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

enum Backend {
    Torus(TorusGeometry),
    Sphere(SphereGeometry),
}

/// A realized surface backend plus the spectral data shared by every module.
pub struct Surface {
    kind: SurfaceKind,
    label: String,
    backend: Backend,
}

/// Construct the backend described by `config`.
pub fn build_surface(config: &SurfaceConfig) -> Result<Arc<Surface>> {
    let label = serde_json::to_string(config)
        .map_err(|e| GtlError::Deserialize(e.to_string()))?;
    let (kind, backend) = match config {
        SurfaceConfig::FlatTorus { resolution, lattice } => (
            SurfaceKind::FlatTorus,
            Backend::Torus(TorusGeometry::new((*resolution, *resolution), *lattice, &[])?),
        ),
        SurfaceConfig::RoundSphere { lmax } => {
            (SurfaceKind::RoundSphere, Backend::Sphere(SphereGeometry::new(*lmax)?))
        }
        SurfaceConfig::ConformalTorus { resolution, lattice, waves } => {
            let terms: Vec<((i32, i32), Complex64)> =
                waves.iter().map(|w| ((w.n[0], w.n[1]), w.coeff())).collect();
            (
                SurfaceKind::ConformalTorus,
                Backend::Torus(TorusGeometry::new((*resolution, *resolution), *lattice, &terms)?),
            )
        }
    };
    Ok(Arc::new(Surface { kind, label, backend }))
}

impl Surface {
    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    /// Deterministic identity string; sections are only compatible when the
    /// labels of their surfaces agree.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn genus(&self) -> usize {
        match self.kind {
            SurfaceKind::RoundSphere => 0,
            _ => 1,
        }
    }

    pub fn ensure_same(&self, other: &Surface) -> Result<()> {
        if self.label == other.label {
            Ok(())
        } else {
            Err(GtlError::SurfaceMismatch)
        }
    }

    /// Largest representable vertical degree, if the backend has one.
    pub fn degree_cap(&self) -> Option<usize> {
        match &self.backend {
            Backend::Torus(_) => None,
            Backend::Sphere(s) => Some(s.lmax()),
        }
    }

    pub fn supports_degree(&self, k: i32) -> bool {
        match &self.backend {
            Backend::Torus(_) => true,
            Backend::Sphere(s) => s.degree_supported(k),
        }
    }

    pub fn section_len(&self, k: i32) -> Result<usize> {
        match &self.backend {
            Backend::Torus(t) => {
                let _ = k;
                Ok(t.section_len())
            }
            Backend::Sphere(s) => s.section_len(k),
        }
    }

    fn check_len(&self, k: i32, got: usize) -> Result<()> {
        let want = self.section_len(k)?;
        if got != want {
            return Err(GtlError::CoefficientLength { k, got, want });
        }
        Ok(())
    }

    pub fn zero_coeffs(&self, k: i32) -> Result<Vec<Complex64>> {
        Ok(vec![Complex64::default(); self.section_len(k)?])
    }

    /// Coefficients of the constant function 1 as a degree-0 section.
    pub fn one_coeffs(&self) -> Vec<Complex64> {
        match &self.backend {
            Backend::Torus(t) => t.one_coeffs(),
            Backend::Sphere(s) => s.one_coeffs(),
        }
    }

    /// Riemannian area of the base surface.
    pub fn area(&self) -> f64 {
        match &self.backend {
            Backend::Torus(t) => t.area(),
            Backend::Sphere(_) => 4.0 * std::f64::consts::PI,
        }
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        match &self.backend {
            Backend::Torus(t) => t.n(),
            Backend::Sphere(s) => s.grid_shape(),
        }
    }

    /// Gauss curvature as a degree-0 coefficient vector.
    pub fn curvature_coeffs(&self) -> Vec<Complex64> {
        match &self.backend {
            Backend::Torus(t) => t.curvature_coeffs().to_vec(),
            Backend::Sphere(s) => s.one_coeffs(),
        }
    }

    /// Gauss curvature sampled on the base grid.
    pub fn curvature_values(&self) -> Array2<f64> {
        match &self.backend {
            Backend::Torus(t) => t.curvature_base().clone(),
            Backend::Sphere(s) => Array2::from_elem(s.grid_shape(), 1.0),
        }
    }

    /// Spectral weight used by Sobolev norms: per-slot surrogate of the
    /// horizontal Laplacian on degree-k sections.
    pub fn mu_slots(&self, k: i32) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Torus(t) => {
                let _ = self.section_len(k)?;
                Ok(t.mu_slots())
            }
            Backend::Sphere(s) => {
                let _ = s.section_len(k)?;
                Ok(s.mu_slots(k))
            }
        }
    }

    /// L^2(SM) pairing of two degree-k coefficient vectors (Liouville
    /// measure: area form times the 2 pi fiber).
    pub fn inner(&self, k: i32, a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
        self.check_len(k, a.len())?;
        self.check_len(k, b.len())?;
        Ok(match &self.backend {
            Backend::Torus(t) => t.inner(a, b),
            Backend::Sphere(s) => s.inner(a, b),
        })
    }

    pub fn norm(&self, k: i32, a: &[Complex64]) -> Result<f64> {
        Ok(self.inner(k, a, a)?.re.max(0.0).sqrt())
    }

    /// Sobolev pairing of order `s`: diagonal weight `(1 + mu + k^2)^(s/2)`
    /// on both arguments, then the L^2 pairing. Order 0 is exactly `inner`.
    pub fn hs_inner(
        &self,
        k: i32,
        a: &[Complex64],
        b: &[Complex64],
        s: f64,
    ) -> Result<Complex64> {
        if s == 0.0 {
            return self.inner(k, a, b);
        }
        self.check_len(k, a.len())?;
        self.check_len(k, b.len())?;
        let mu = self.mu_slots(k)?;
        let weight = |m: f64| (1.0 + m + (k * k) as f64).powf(s / 2.0);
        let wa: Vec<Complex64> =
            a.iter().zip(&mu).map(|(v, m)| v * weight(*m)).collect();
        let wb: Vec<Complex64> =
            b.iter().zip(&mu).map(|(v, m)| v * weight(*m)).collect();
        self.inner(k, &wa, &wb)
    }

    pub fn hs_norm(&self, k: i32, a: &[Complex64], s: f64) -> Result<f64> {
        Ok(self.hs_inner(k, a, a, s)?.re.max(0.0).sqrt())
    }

    /// Raising operator on degree-k sections (degree k+1 output).
    pub fn eta_plus(&self, k: i32, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(k, coeffs.len())?;
        match &self.backend {
            Backend::Torus(t) => t.eta_plus(k, coeffs),
            Backend::Sphere(s) => s.eta_plus(k, coeffs),
        }
    }

    /// Lowering operator on degree-k sections (degree k-1 output).
    pub fn eta_minus(&self, k: i32, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(k, coeffs.len())?;
        match &self.backend {
            Backend::Torus(t) => t.eta_minus(k, coeffs),
            Backend::Sphere(s) => s.eta_minus(k, coeffs),
        }
    }

    /// Raising/lowering followed by plain band projection (no tail guard);
    /// this is the finite-band discretization of the operator used when
    /// assembling operator matrices.
    pub fn eta_projected(&self, k: i32, coeffs: &[Complex64], raise: bool) -> Result<Vec<Complex64>> {
        self.check_len(k, coeffs.len())?;
        let _ = self.section_len(if raise { k + 1 } else { k - 1 })?;
        match &self.backend {
            Backend::Torus(t) => Ok(t.eta_projected(k, coeffs, raise)),
            Backend::Sphere(s) => {
                if raise {
                    s.eta_plus(k, coeffs)
                } else {
                    s.eta_minus(k, coeffs)
                }
            }
        }
    }

    /// Pointwise product of a degree-ka and a degree-kb section at degree
    /// ka+kb; fails when the product leaves the resolvable band.
    pub fn multiply(
        &self,
        ka: i32,
        a: &[Complex64],
        kb: i32,
        b: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        self.check_len(ka, a.len())?;
        self.check_len(kb, b.len())?;
        match &self.backend {
            Backend::Torus(t) => t.multiply(a, b),
            Backend::Sphere(s) => s.multiply(ka, a, kb, b),
        }
    }

    /// Pointwise reciprocal of a nonvanishing degree-0 section.
    pub fn reciprocal(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(0, coeffs.len())?;
        match &self.backend {
            Backend::Torus(t) => t.reciprocal(coeffs),
            Backend::Sphere(s) => s.reciprocal(coeffs),
        }
    }

    /// Values of a degree-k section on the base grid (row-major).
    pub fn values(&self, k: i32, coeffs: &[Complex64]) -> Result<Array2<Complex64>> {
        self.check_len(k, coeffs.len())?;
        Ok(match &self.backend {
            Backend::Torus(t) => t.synthesize_base(coeffs),
            Backend::Sphere(s) => s.synthesize(k, coeffs),
        })
    }

    /// Coefficients of a degree-k section from base-grid values; errors when
    /// the samples carry significant out-of-band mass.
    pub fn analyze(&self, k: i32, values: &Array2<Complex64>) -> Result<Vec<Complex64>> {
        let shape = self.grid_shape();
        if values.dim() != shape {
            return Err(GtlError::ResolutionTooSmall(values.dim().0, values.dim().1));
        }
        match &self.backend {
            Backend::Torus(t) => {
                let _ = self.section_len(k)?;
                t.analyze_base(values)
            }
            Backend::Sphere(s) => s.analyze(k, values),
        }
    }

    /// Integral of a degree-0 section against the area form.
    pub fn integral(&self, coeffs: &[Complex64]) -> Result<Complex64> {
        self.check_len(0, coeffs.len())?;
        Ok(match &self.backend {
            Backend::Torus(t) => t.integral(coeffs),
            Backend::Sphere(_) => {
                // only the constant mode survives integration
                let one = self.one_coeffs();
                let idx = one.iter().position(|c| c.norm() > 0.0).unwrap();
                coeffs[idx] * one[idx].re
            }
        })
    }

    /// Mean value of a degree-0 section over the base surface.
    pub fn mean_value(&self, coeffs: &[Complex64]) -> Result<Complex64> {
        Ok(self.integral(coeffs)? / self.area())
    }

    /// Base-grid quadrature table (weights integrate the area form).
    pub fn quadrature(&self) -> QuadratureTable {
        match &self.backend {
            Backend::Torus(t) => {
                let (nodes, weights) = t.quadrature();
                QuadratureTable { nodes, weights }
            }
            Backend::Sphere(s) => {
                let (nodes, weights) = s.quadrature();
                QuadratureTable { nodes, weights }
            }
        }
    }

    /// Dual-lattice frequency of a torus slot index, if this is a torus.
    pub fn torus_frequencies(&self) -> Option<Vec<[f64; 2]>> {
        match &self.backend {
            Backend::Torus(t) => Some(t.frequencies()),
            Backend::Sphere(_) => None,
        }
    }

    /// Lattice generators (rows) of a torus base, if this is a torus.
    pub fn torus_lattice(&self) -> Option<[[f64; 2]; 2]> {
        match &self.backend {
            Backend::Torus(t) => Some(t.lattice()),
            Backend::Sphere(_) => None,
        }
    }

    /// Per-slot (l, m) labels of a sphere section, if this is a sphere.
    pub fn sphere_slots(&self, k: i32) -> Option<Vec<(i32, i32)>> {
        match &self.backend {
            Backend::Torus(_) => None,
            Backend::Sphere(s) => Some(s.slots(k).map(|(_, l, m)| (l, m)).collect()),
        }
    }
}

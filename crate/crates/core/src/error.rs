//! Error type shared by all toolkit modules.

use thiserror::Error;

/// Everything that can go wrong in the core library.
///
/// Numeric *warnings* (rank-deficient solves, truncated tails) are not errors:
/// they are carried as statuses on the corresponding reports so callers can
/// still inspect the partial result.
#[derive(Debug, Error)]
pub enum GtlError {
    /// Lattice generators are (numerically) linearly dependent.
    #[error("degenerate lattice: |det| = {det:.3e} is below the construction threshold")]
    DegenerateLattice { det: f64 },

    /// Base resolution too small or odd; the coefficient layout needs an even
    /// grid with at least a handful of resolvable frequencies.
    #[error("resolution {0}x{1} unsupported: both extents must be even and >= 4")]
    ResolutionTooSmall(usize, usize),

    /// Conformal factor coefficients do not describe a real field.
    #[error("conformal factor is not real: max |Im lambda| = {max_imag:.3e} on the grid")]
    NonRealConformalFactor { max_imag: f64 },

    /// Sphere backend needs a positive band limit.
    #[error("sphere band limit must satisfy 1 <= L <= {max}, got {got}")]
    SphereBandLimit { got: usize, max: usize },

    /// The fiber sampling cannot resolve the requested vertical degrees.
    #[error("fiber grid with {n_theta} angles cannot resolve degrees |k| <= {kmax} (need >= {need})")]
    ThetaGridTooSmall { n_theta: usize, kmax: i32, need: usize },

    /// Fiber samples were not taken on a uniform angle grid.
    #[error("fiber angles are not uniform: max deviation {max_dev:.3e} from 2*pi*j/n")]
    NonUniformGrid { max_dev: f64 },

    /// A stack operation received no modes.
    #[error("mode stack is empty")]
    EmptyStack,

    /// Two sections/stacks built over different backends were combined.
    #[error("surface mismatch: operands were built over different backends")]
    SurfaceMismatch,

    /// Coefficient vector length does not match the backend layout.
    #[error("coefficient length {got} does not match backend layout length {want} at degree {k}")]
    CoefficientLength { k: i32, got: usize, want: usize },

    /// Result of an operation would leave the stored base band (it would alias).
    #[error("band limit exceeded: result support {support} > stored band {band}")]
    BandLimitExceeded { support: usize, band: usize },

    /// Vertical degree outside what the backend can represent.
    #[error("vertical degree {k} outside the representable range |k| <= {max}")]
    DegreeOutOfRange { k: i32, max: usize },

    /// Singular values cluster at the kernel threshold; the reported dimension
    /// would depend on the tolerance.
    #[error("kernel threshold ambiguous: smallest retained singular value {above:.3e} is within 10x of the cut {cut:.3e}")]
    TruncationTooTight { above: f64, cut: f64 },

    /// Mode recursion produced a coefficient blow-up.
    #[error("growth detected at degree {k}: ||u_k|| = {norm:.3e} exceeds 1e6 * max(||u0||, ||u1||) = {bound:.3e}")]
    GrowthDetected { k: i32, norm: f64, bound: f64 },

    /// A twistor series was requested from a stack with modes below its weight.
    #[error("stack carries nonzero modes below the series weight m = {m} (found k = {k})")]
    NegativeModesPresent { m: i32, k: i32 },

    /// Radial restriction outside [0, 1).
    #[error("radius {0} outside [0, 1)")]
    RadiusOutOfRange(f64),

    /// Dolbeault bidegree outside the range of the operator table.
    #[error("bidegree ({p},{q}) invalid: need 0 <= p <= 2 and 0 <= q <= 1 to apply D")]
    InvalidBidegree { p: u8, q: u8 },

    /// Connection data reaches below degree -1.
    #[error("connection stack must vanish below degree -1 (found nonzero mode at k = {k})")]
    ModesBelowMinusOne { k: i32 },

    /// Gauge function vanishes somewhere on the base grid.
    #[error("gauge function vanishes: min |psi| = {min_abs:.3e} on the base grid")]
    PsiVanishes { min_abs: f64 },

    /// The cone flow needs a nonzero initial covector.
    #[error("initial covector is zero")]
    ZeroInitialCovector,

    /// A vertical crossing could not be certified transversal.
    #[error("crossing at t = {t:.6} unresolved: |dx/dt| = {dx:.3e} below threshold")]
    UnresolvedCrossing { t: f64, dx: f64 },

    /// Horizon doubling did not contract; the asymptotic direction does not
    /// settle for this profile.
    #[error("riccati limits did not converge: horizon increments {d1:.3e} -> {d2:.3e} are not contracting")]
    NoConvergence { d1: f64, d2: f64 },

    /// The adaptive integrator gave up.
    #[error("integrator failed at t = {t:.6}: step size underflow")]
    StepSizeUnderflow { t: f64 },

    /// Curvature table unusable for interpolation.
    #[error("curvature table invalid: {0}")]
    BadCurvatureTable(String),

    /// Operation is not available on this backend.
    #[error("operation `{op}` is not available on backend `{backend}`")]
    UnsupportedSurface { op: &'static str, backend: &'static str },

    /// Serialized mode data did not match the expected layout.
    #[error("deserialization failed: {0}")]
    Deserialize(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, GtlError>;

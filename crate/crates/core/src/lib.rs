//! Spectral toolkit for geodesic-flow analysis on closed surfaces.
//!
//! The crate decomposes functions on the unit tangent bundle of a model
//! surface into vertical Fourier modes, realizes the raising/lowering
//! operators of the associated flow frame in coefficient space, and builds on
//! that to solve transport equations, manipulate fiberwise-holomorphic
//! extensions, and track Jacobi/Riccati data along model geodesics.

pub mod cone;
pub mod error;
pub mod geometry;
pub mod modes;
pub mod operators;
pub mod transport;
pub mod twistor;

pub use error::{GtlError, Result};
pub use geometry::{
    build_surface, LambdaWave, QuadratureTable, Surface, SurfaceConfig, SurfaceKind,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

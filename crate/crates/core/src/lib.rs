//! Numerical laboratory for the linearized free-surface Stokes problem in a
//! half-space with gravity and surface tension: symbols, the Lopatinskii
//! determinant, contour-integral evolution, and decay-rate measurement.

pub mod contours;
pub mod data;
pub mod decaylab;
pub mod error;
pub mod gauss;
pub mod lopatinskii;
pub mod resolvent;
pub mod semigroup;
pub mod symbols;
pub mod verify;

pub use error::{LabError, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Kinetically constrained spin-s rings: exact quench dynamics on the
//! blockaded Hilbert space, and the two-angle variational flow built from a
//! bond-dimension-2 matrix product state.
//!
//! Units: every operator is stored with Ω = 1. Functions that take `omega`
//! scale at the boundary.

pub mod basis;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod ops;
pub mod orbit;
pub mod spectral;
pub mod thermal;
pub mod varmps;

pub use error::{Error, Result};

/// Complex scalar used for all state vectors.
pub type C64 = num_complex::Complex64;

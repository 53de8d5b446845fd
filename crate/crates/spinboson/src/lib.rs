//! Spin-boson toolkit.
//!
//! Exact spectra of a two-level system coupled to a single boson mode in a
//! truncated Fock x spin basis, a position-space rotation that separates the
//! problem into two effective one-dimensional oscillators, and the level
//! splittings at multiphoton anticrossings computed three independent ways
//! (exact minimum-gap search, a weak-coupling closed form, and first-order
//! degenerate perturbation theory in the rotated frame).

pub mod cli;
pub mod fockspin;
pub mod grid1d;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod resonance;
pub mod rotation;
pub mod tridiag;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

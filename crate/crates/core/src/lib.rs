//! Numerics for a single spin coupled to a harmonic oscillator: exact
//! diagonalization dynamics, mean-field (factorized) dynamics, the split of
//! subsystem energy flow into coherent (work) and incoherent (heat) parts,
//! and the quality measures built on top of them.
//!
//! Everything is dense and deterministic. Units are chosen with ħ = 1; all
//! frequencies, couplings and times are dimensionless.

pub mod bosonic;
pub mod error;
pub mod hilbert;
pub mod lembas;
pub mod measures;
pub mod models;
pub mod oracles;
pub mod propagation;

mod linalg;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, HilbertDims, Operator, StateVector};
pub use models::{DerivedConstants, ModelKind, SystemParams};
pub use propagation::TimeGrid;

/// Default occupation threshold: a trajectory sample is trusted only while
/// the top two Fock levels together hold less population than this.
pub const OCCUPATION_THRESHOLD: f64 = 1e-6;

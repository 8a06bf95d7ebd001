//! Compilation of d-dimensional unitaries into SNAP and displacement gate
//! sequences for a qudit encoded in the Fock states of a cavity mode.
//!
//! The pipeline is: [`decompose`] factors a unitary into SNAP phases and
//! adjacent-level Givens rotations, [`synth`] lowers each rotation through
//! the closed-form angle-to-displacement map into five-gate blocks of SNAP
//! and displacement gates, and [`verify`] simulates the result in the
//! truncated Fock space and runs the scaling experiments.

pub mod cli;
pub mod decompose;
pub mod fockops;
pub mod synth;
pub mod targets;
pub mod verify;

/// Errors shared across the library modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("input is not unitary: max deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NonUnitary { deviation: f64, tolerance: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("truncation risk: {0}")]
    TruncationRisk(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Experimental toolkit for simultaneous and dual Diophantine approximation
//! on curves: finite-height exponent estimators, transference inequality
//! checks, dyadic ball coverings, and Monte Carlo limsup-set measurements.

pub mod cf;
pub mod cli;
pub mod covering;
pub mod curve;
pub mod exponent;
pub mod measure;
pub mod point;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod transfer;

mod approx;

pub use approx::PointEvaluator;
pub use point::{CoordDescriptor, PointSpec, Shift};
pub use scalar::{nearest_integer_distance, RealScalar};

use thiserror::Error;

/// Library-wide error type. The CLI maps `Precondition`-class errors to
/// exit code 2 and `Invariant` to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grammar error: unexpected token `{token}` in `{input}`")]
    Grammar { input: String, token: String },
    #[error("descriptor error: {0}")]
    Descriptor(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("precision shortfall at q={q}: needed {needed} bits, configured maximum {max}")]
    Precision { q: String, needed: u64, max: u64 },
    #[error("quadrature did not converge: achieved tolerance {achieved:e}")]
    Quadrature { achieved: f64 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

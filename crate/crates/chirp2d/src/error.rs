//! Error type shared by the signal, criterion, optimizer and estimator layers.

use std::fmt;

/// Errors produced by model construction, criterion evaluation and fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The observation grid is smaller than the operation can handle.
    GridTooSmall {
        rows: usize,
        cols: usize,
        min_rows: usize,
        min_cols: usize,
    },
    /// A model was asked to synthesize with no components.
    EmptyModel,
    /// A parameter that must be finite is NaN or infinite.
    NonFinite { what: &'static str },
    /// A frequency or frequency-rate parameter lies outside the open
    /// interval (0, pi).
    OutOfDomain { what: String, value: f64 },
    /// Two components share a nonlinear parameter pair, which makes them
    /// indistinguishable to the column/row criteria.
    DuplicatePair { first: usize, second: usize, axis: &'static str },
    /// Vector length does not match the basis length.
    LengthMismatch { expected: usize, actual: usize },
    /// A chirp basis needs at least two samples.
    BasisTooShort { len: usize },
    /// The 2x2 normal matrix of the basis is numerically singular at the
    /// requested pair.
    DegenerateBasis { det: f64, threshold: f64 },
    /// Every node of a grid search evaluated to a non-finite value.
    AllInvalid,
    /// Asymptotic covariances are undefined for a component with zero power.
    ZeroPower,
    /// A configuration value is out of its allowed range.
    BadConfig { what: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridTooSmall { rows, cols, min_rows, min_cols } => write!(
                f,
                "grid is {rows}x{cols} but the operation needs at least {min_rows}x{min_cols}"
            ),
            Error::EmptyModel => write!(f, "model has no components to synthesize"),
            Error::NonFinite { what } => write!(f, "{what} must be finite"),
            Error::OutOfDomain { what, value } => {
                write!(f, "{what} = {value} lies outside the open interval (0, pi)")
            }
            Error::DuplicatePair { first, second, axis } => write!(
                f,
                "components {first} and {second} share the same {axis} (frequency, rate) pair"
            ),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "vector length {actual} does not match basis length {expected}")
            }
            Error::BasisTooShort { len } => {
                write!(f, "chirp basis needs at least 2 samples, got {len}")
            }
            Error::DegenerateBasis { det, threshold } => write!(
                f,
                "basis normal matrix is numerically singular (det {det:.3e} <= {threshold:.3e})"
            ),
            Error::AllInvalid => write!(f, "objective was non-finite at every grid node"),
            Error::ZeroPower => write!(f, "component has zero power (A^2 + B^2 = 0)"),
            Error::BadConfig { what } => write!(f, "invalid configuration: {what}"),
        }
    }
}

impl std::error::Error for Error {}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.
//!
//! Every fallible operation in this crate reports through [`Error`]; the
//! variants are grouped by the contract they enforce (input shape, numeric
//! domain, optimizer step validity, linear algebra, serialization).

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// An operation that needs at least one element received an empty slice.
    EmptyInput { what: &'static str },
    /// Two slices that must agree in length did not.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A configuration value violated its documented domain.
    InvalidConfig(String),
    /// Bias correction is defined for step indices t >= 1.
    ZeroStepIndex,
    /// Spherical interpolation needs two nonzero-norm endpoints.
    ZeroNormInput { what: &'static str },
    /// The linear mixture norm collapsed below the representable threshold,
    /// so a normalized interpolation result is undefined.
    DegenerateInterpolation,
    /// A gradient containing NaN/inf was handed to a step function. The
    /// step is rejected; optimizer state and parameters are untouched.
    NonFiniteGradient { index: usize },
    /// The objective returned a NaN/inf loss; the run aborts at this step.
    NonFiniteLoss { step: u64 },
    /// A computed quantity that must be finite was not (overflow guard).
    NonFiniteValue { what: &'static str },
    /// Finite-difference probe hit a non-finite loss at one coordinate.
    NonFiniteProbe { index: usize },
    /// The factored second moment degenerated (for Adafactor this means a
    /// zero denominator that its eps-inside-EMA should have prevented).
    DegenerateFim,
    /// The damped Fisher system was not positive definite enough to solve.
    SingularMatrix { pivot: usize },
    /// An estimator that needs per-example gradients was given an objective
    /// that only exposes batch evaluation.
    PerExampleUnsupported { objective: String },
    /// Dense Fisher operations are restricted to small parameter counts.
    DimTooLarge { dim: usize, max: usize },
    /// A state snapshot could not be parsed.
    SnapshotParse { line: usize, msg: String },
    /// A columnar dataset file could not be parsed.
    DatasetParse { line: usize, msg: String },
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput { what } => write!(f, "{what}: input must be non-empty"),
            Error::LengthMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: length mismatch (expected {expected}, got {got})"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::ZeroStepIndex => write!(f, "bias correction needs step index t >= 1"),
            Error::ZeroNormInput { what } => {
                write!(f, "{what}: endpoint with zero norm")
            }
            Error::DegenerateInterpolation => {
                write!(f, "interpolation mixture has vanishing norm; no direction to keep")
            }
            Error::NonFiniteGradient { index } => {
                write!(f, "non-finite gradient component at index {index}; step rejected")
            }
            Error::NonFiniteLoss { step } => {
                write!(f, "non-finite loss at step {step}; run aborted")
            }
            Error::NonFiniteValue { what } => write!(f, "{what} is not finite"),
            Error::NonFiniteProbe { index } => {
                write!(f, "finite-difference probe non-finite at coordinate {index}")
            }
            Error::DegenerateFim => write!(f, "factored second moment degenerated to zero"),
            Error::SingularMatrix { pivot } => {
                write!(f, "damped Fisher not positive definite (pivot {pivot}); raise damping")
            }
            Error::PerExampleUnsupported { objective } => {
                write!(f, "objective '{objective}' does not expose per-example gradients")
            }
            Error::DimTooLarge { dim, max } => {
                write!(f, "dense Fisher limited to dim <= {max}, got {dim}")
            }
            Error::SnapshotParse { line, msg } => {
                write!(f, "snapshot parse error at line {line}: {msg}")
            }
            Error::DatasetParse { line, msg } => {
                write!(f, "dataset parse error at line {line}: {msg}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

use alloc::string::String;
use core::fmt;

/// Errors produced by the solver core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its domain invariant.
    InvalidParameter(String),
    /// Array shapes or mode counts do not match.
    ShapeMismatch(String),
    /// Requested modes cannot be represented on the quadrature grid.
    Aliasing(String),
    /// A nonfinite coefficient appeared during time integration.
    IntegrationDiverged { step: usize, equation: usize },
    /// Noise mode index out of range.
    ModeOutOfRange { index: usize, n_noise_modes: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Aliasing(msg) => write!(f, "aliasing: {msg}"),
            Error::IntegrationDiverged { step, equation } => write!(
                f,
                "integration diverged: nonfinite coefficient in equation {equation} at step {step}"
            ),
            Error::ModeOutOfRange { index, n_noise_modes } => write!(
                f,
                "noise mode {index} out of range (n_noise_modes = {n_noise_modes})"
            ),
        }
    }
}

impl core::error::Error for Error {}

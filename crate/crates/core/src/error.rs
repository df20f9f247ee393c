use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("nonpositive temperature {value} in channel {channel}")]
    NonpositiveTemperature { channel: usize, value: f64 },

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("cannot differentiate through primitive `{0}`")]
    UnsupportedPrimitive(String),

    #[error("matrix is not antisymmetric (max deviation {0:e})")]
    NotSkew(f64),

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("nonpositive volume {0}")]
    NonpositiveVolume(f64),

    #[error("piston position {x} outside (-{l}, {l})")]
    PistonOutOfRange { x: f64, l: f64 },

    #[error("point outside the physical domain: {0}")]
    OutsidePhysicalDomain(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("nonfinite loss at epoch {epoch}")]
    NonfiniteLoss { epoch: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// The underlying error of a failed step, or `self`.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("no work regime: B0 = {b0} T must be strictly below B1 = {b1} T")]
    NoWorkRegime { b0: f64, b1: f64 },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("malformed value for `{key}`: `{value}`")]
    MalformedValue { key: String, value: String },

    #[error("configuration line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("quadrature did not converge for {what}: estimate {value:e}, error {error:e}")]
    Quadrature {
        what: &'static str,
        value: f64,
        error: f64,
    },

    #[error("fixed-point iteration for {what} did not converge after {iterations} iterations")]
    FixedPoint {
        what: &'static str,
        iterations: usize,
    },

    #[error("Bloch invariant violated at t = {t:e} s: r3^2 + |r+|^2 = {norm}")]
    InvariantViolation { t: f64, norm: f64 },

    #[error("solver step {step:e} s is too coarse: kernel requires at most {limit:e} s")]
    StepTooCoarse { step: f64, limit: f64 },

    #[error("kernel table covers {covered:e} s of history but {required:e} s is needed")]
    KernelTooShort { covered: f64, required: f64 },

    #[error("integration would need {steps} steps, above the limit of {limit}")]
    TooManySteps { steps: usize, limit: usize },

    #[error("no crossing of the work-field plane in [0, {horizon:e}] s")]
    CrossingNotFound { horizon: f64 },

    #[error("record grids differ: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that come from user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::NoWorkRegime { .. }
                | Error::UnknownKey(_)
                | Error::MalformedValue { .. }
                | Error::ConfigSyntax { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

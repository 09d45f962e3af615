use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {error:e} exceeds {tolerance:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("path reached {steps} steps before D exceeded horizon {horizon}")]
    HorizonNotReached { horizon: f64, steps: usize },

    #[error("time {t} outside path range [{start}, {end})")]
    OutOfHorizon { t: f64, start: f64, end: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors produced by a numerical routine rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::HorizonNotReached { .. }
                | Error::Unstable(_)
                | Error::Budget(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_order(name: &str, beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} = {beta} must lie strictly inside (0, 1)")))
    }
}

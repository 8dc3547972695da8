use thiserror::Error;

/// Errors surfaced by the simulator and the experiment harness.
#[derive(Debug, Error)]
pub enum SimError {
    /// An argument lies outside the mathematical domain of an operation
    /// (negative time, quadrature exponent below 2, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent run parameters (averaging window larger than the micro
    /// batch, horizon not a multiple of the macro step, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Not enough data to form the requested statistic.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// Two spectral fields do not live on the same eigenbasis.
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

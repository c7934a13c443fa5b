use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated at its singular point (|x| = {x_norm:e}, |v| = {v_norm:e})")]
    Singular { x_norm: f64, v_norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("measures cannot be coupled: {0}")]
    Mismatch(String),

    #[error("step guard tripped at t = {time}: particle {index} moved {displacement:.4e} (limit {limit:.4e})")]
    StepGuard {
        time: f64,
        index: usize,
        displacement: f64,
        limit: f64,
    },

    #[error("near-singular configuration at t = {0}")]
    NearSingular(f64),

    #[error("time {time} outside the integrated range [0, {t_final}]")]
    TimeOutOfRange { time: f64, t_final: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical check failed: {0}")]
    Numerics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

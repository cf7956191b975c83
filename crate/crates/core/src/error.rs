use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget exceeded: {what} needs {needed} but the guard allows {allowed}")]
    BudgetExceeded { what: &'static str, needed: u64, allowed: u64 },

    #[error("integrator rejected step at t = {t}: local error {error:.3e} with dt = {dt:.3e} already at the floor")]
    StepRejected { t: f64, dt: f64, error: f64 },

    #[error("field contains non-finite coefficient at k = {0}")]
    NonFinite(i64),

    #[error("unsupported query: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

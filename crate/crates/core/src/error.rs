use thiserror::Error;

/// Errors raised by mesh construction, model evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("irreversibility breach at interface node {node}: {later} < {earlier}")]
    Irreversibility {
        node: usize,
        earlier: f64,
        later: f64,
    },

    #[error("competitor {index} violates the Dirichlet condition at dof {dof}")]
    Competitor { index: usize, dof: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite objective after {iterations} iterations")]
    NonFinite { iterations: usize },

    #[error("step {step} (t = {time}) did not converge: residual {residual:e}")]
    NotConverged {
        step: usize,
        time: f64,
        residual: f64,
    },

    #[error("scenario mismatch: {0}")]
    Scenario(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("initial configuration rejected: {0}")]
    Initial(String),

    #[error("linear algebra: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Parameter {
        field: field.into(),
        reason: reason.into(),
    }
}

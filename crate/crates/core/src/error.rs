use thiserror::Error;

/// Errors raised by the pointwise algebra, symbol analysis, grid calculus and flows.
#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned input: condition number {condition:.3e} exceeds {limit:.1e}")]
    Conditioning { condition: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("form has terms outside bidegree ({p},{q})")]
    Bidegree { p: usize, q: usize },

    #[error("symbol image leaves the d-symbol kernel (relative residual {0:.3e})")]
    ProjectionResidual(f64),

    #[error("axis {0} is not active on this grid")]
    InactiveAxis(String),

    #[error("positivity lost: {0}")]
    PositivityLoss(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AnomalyError>;

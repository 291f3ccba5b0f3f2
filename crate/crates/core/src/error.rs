use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum HartreeError {
    #[error("invalid grid size: {0}")]
    Sizing(String),
    #[error("degenerate field: {0}")]
    DegenerateField(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("collapse detected at mass {mass}: {detail}")]
    Collapse { mass: f64, detail: String },
    #[error("invalid fit window: {0}")]
    Window(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("inputs are identical to within 1e-14; no difference mode")]
    DegenerateDifference,
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HartreeError>;

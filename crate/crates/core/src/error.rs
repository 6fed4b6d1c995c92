use thiserror::Error;

use crate::linmodels::Arm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate time domain: at least two distinct time values are required")]
    DegenerateDomain,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("basis index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("evaluation point {t} outside knot domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },

    #[error("singular design matrix; offending columns: {}", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate residuals: {group} group has zero mean squared residual")]
    DegenerateResiduals { group: Arm },

    #[error("degenerate scale: median absolute residual is zero")]
    DegenerateScale,

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("random-walk drift evaluated before it was realized")]
    UnrealizedDrift,

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

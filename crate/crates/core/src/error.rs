use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: N={left_n}, L={left_l} vs N={right_n}, L={right_l}")]
    GridMismatch {
        left_n: usize,
        left_l: f64,
        right_n: usize,
        right_l: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{field} violates the divergence constraint (relative residual {residual:e})")]
    ConstraintViolation { field: &'static str, residual: f64 },

    #[error("non-finite state at t = {t} after {retries} step halvings")]
    BlowUp { t: f64, retries: u32 },

    #[error("exponent undefined for alpha = {alpha}: requires alpha > 1/2")]
    UndefinedExponent { alpha: f64 },

    #[error("series too short: need at least {needed} records, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("invalid levels: {0}")]
    InvalidLevels(String),

    #[error("mode {mode:?} is outside the resolved band of an N={n} grid")]
    ModeOutsideGrid { mode: [i64; 3], n: usize },

    #[error("manufactured {field} field is not divergence-free (relative residual {residual:e})")]
    NotDivergenceFree { field: &'static str, residual: f64 },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("resolution mismatch: file has N={found}, context expects N={expected}")]
    ResolutionMismatch { expected: usize, found: usize },

    #[error("parameter echo mismatch for `{name}`: file has {found}, run uses {expected}")]
    ParameterMismatch {
        name: &'static str,
        expected: f64,
        found: f64,
    },

    #[error("{path}: column mismatch with existing header")]
    ColumnMismatch { path: PathBuf },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

use std::path::PathBuf;

/// Errors produced by the models, policies and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("position discount {0} is outside [0, 1]")]
    InvalidDiscount(f64),

    #[error("weight {value} of item {index} is outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid super arm: {0}")]
    InvalidArm(String),

    #[error("brute-force oracle guard exceeded: {items} items, k_max {k_max} (limit 12 items, k_max 4)")]
    SizeGuard { items: usize, k_max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

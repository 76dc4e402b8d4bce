use thiserror::Error;

/// Errors raised across the observer toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("abstraction model has no data")]
    NoData,

    #[error("inconsistent data for output {output}: envelope lower {lower} exceeds upper {upper}")]
    InconsistentData {
        output: usize,
        lower: f64,
        upper: f64,
    },

    #[error("cannot estimate a Lipschitz constant: all sample centers coincide")]
    NoSlope,

    #[error(
        "observer diverged at step {step}: component {component} has lower {lower} > upper {upper}"
    )]
    ObserverDivergence {
        step: usize,
        component: usize,
        lower: f64,
        upper: f64,
    },

    #[error("state left the configured domain at step {step} (component {component} = {value})")]
    DomainEscape {
        step: usize,
        component: usize,
        value: f64,
    },

    #[error("gain synthesis failed: {0}")]
    SynthesisFailed(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("SDPA parse error at line {line}: {msg}")]
    Sdpa { line: usize, msg: String },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

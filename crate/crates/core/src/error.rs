use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Input that is well-formed but inconsistent with the physical model
    /// (for example a comparator min-entropy below one bit).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("probability density is not bimodal ({peaks} peak(s) found)")]
    UnimodalPdf { peaks: usize },

    #[error("source is untrusted: reduction factor is infinite")]
    UntrustedSource,

    #[error("not enough debiased bits for the seed: {deficit} more needed")]
    NeedsMoreEntropy { deficit: usize },

    #[error("B = {b:.4} lies outside the calibrated curve (max {max:.4})")]
    OutOfModel { b: f64, max: f64 },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

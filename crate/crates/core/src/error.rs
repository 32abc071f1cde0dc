use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transmitted symbol on subcarrier {subcarrier} is zero")]
    ZeroSymbol { subcarrier: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },

    #[error("sub-array ordinal {ell} out of range (L = {count})")]
    SubarrayOutOfRange { ell: usize, count: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Model order selection left no noise subspace.
    #[error("degenerate model order: estimated order {order} leaves no noise subspace (M = {dim})")]
    DegenerateOrder { order: usize, dim: usize },

    /// The steering vector of a detection already lies in the noise subspace.
    #[error("target already canceled: residual norm {residual:e} below {threshold:e}")]
    AlreadyCanceled { residual: f64, threshold: f64 },

    #[error("scene has zero signal power")]
    ZeroPower,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("malformed CSI file at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad inputs or configuration rather than
    /// numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Domain(_)
            | Error::Dimension { .. }
            | Error::Format { .. }
            | Error::SubarrayOutOfRange { .. }
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

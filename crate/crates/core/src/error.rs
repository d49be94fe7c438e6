use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {re} + {im}i is not in the open upper half-plane")]
    NotInHalfPlane { re: f64, im: f64 },

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rejection sampler gave up after {attempts} attempts ({what})")]
    RejectionExhausted { what: &'static str, attempts: u64 },

    #[error("tree exceeded the vertex cap of {cap}")]
    TreeTooLarge { cap: usize },

    #[error("matrix of order {n} exceeds the dense oracle limit {limit}")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("population left the half-plane at generation {generation}")]
    LeftHalfPlane { generation: u64 },

    #[error("malformed tree file, line {line}: {reason}")]
    TreeFormat { line: usize, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            Error::NotInHalfPlane { .. }
            | Error::InvalidLaw(_)
            | Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Json(_)
            | Error::TreeFormat { .. } => true,
            _ => false,
        }
    }
}

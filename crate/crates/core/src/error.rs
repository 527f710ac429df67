use thiserror::Error;

/// Crate-wide error type. Each variant maps to a stable machine-readable code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode registry error: {0}")]
    Registry(String),

    #[error("photon cutoff exceeded: mode {mode} would hold {count} photons (cutoff {cutoff})")]
    PhotonCutoff { mode: String, count: u32, cutoff: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown receiver kind '{0}'")]
    UnknownKind(String),

    #[error("malformed parameters: {0}")]
    MalformedParams(String),

    #[error("unknown setting '{0}'")]
    UnknownSetting(String),

    #[error("unknown outcome '{outcome}' in setting '{setting}'")]
    UnknownOutcome { setting: String, outcome: String },

    #[error("Alice state '{label}' is not contained in the reversed space (lost norm {lost_norm:.3e})")]
    Embedding { label: String, lost_norm: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no zero-error isometry with eve_dim {requested}; minimal feasible eve_dim is {minimal:?}")]
    Infeasible { requested: usize, minimal: Option<usize> },

    #[error("empty round log")]
    EmptyLog,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier used in machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Registry(_) => "registry",
            Error::PhotonCutoff { .. } => "photon-cutoff",
            Error::Domain(_) => "domain",
            Error::UnknownKind(_) => "unknown-kind",
            Error::MalformedParams(_) => "malformed-params",
            Error::UnknownSetting(_) => "unknown-setting",
            Error::UnknownOutcome { .. } => "unknown-outcome",
            Error::Embedding { .. } => "embedding",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::Infeasible { .. } => "infeasible",
            Error::EmptyLog => "empty-log",
            Error::Unsupported(_) => "unsupported",
            Error::Schema(_) => "schema",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

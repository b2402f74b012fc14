use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} is not Hermitian (residual {residual:.3e})")]
    NotHermitian { what: String, residual: f64 },

    #[error("{what} is not unitary (residual {residual:.3e})")]
    NotUnitary { what: String, residual: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("Fock truncation leak: population {tail:.3e} above level {cutoff}")]
    TruncationLeak { tail: f64, cutoff: usize },

    #[error("degenerate post-selection: probability {probability:.3e} is below 1e-12")]
    DegeneratePostselection { probability: f64 },

    #[error("scenario has no post-selection state")]
    MissingPostselection,

    #[error("{0} requires a pure system state")]
    PureStateRequired(&'static str),

    #[error(
        "curvature routes disagree: commutator {commutator:.12e}, weak-value {weak_value:.12e}"
    )]
    RouteDisagreement { commutator: f64, weak_value: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

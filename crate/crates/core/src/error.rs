use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("synthesis failed: no feasible lambda among {} candidates", .0.len())]
    SynthesisFailed(Vec<LambdaDiagnostic>),

    #[error("simulation aborted at t = {time}: {reason}")]
    SimulationAborted { time: f64, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Outcome of one lambda candidate during synthesis.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LambdaDiagnostic {
    pub lambda: f64,
    pub status: String,
    pub iterations: usize,
    pub worst_violation: f64,
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SynthesisFailed(_) => 3,
            Error::SimulationAborted { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

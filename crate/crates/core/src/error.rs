use thiserror::Error;

/// Errors raised by the solvers, transforms and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not normalized: norm = {norm:.3e}")]
    NotNormalized { norm: f64 },

    #[error("density matrix rejected: {0}")]
    InvalidDensityMatrix(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step rejected by {guard}: ratio {ratio:.4} exceeds limit {limit:.4}")]
    StepRejected {
        guard: &'static str,
        ratio: f64,
        limit: f64,
    },

    #[error("density {value:.3e} below floor {floor:.3e} at grid index {index}")]
    DensityFloor {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("spin magnitude violated at grid index {index}: |s| = {magnitude:.15}, expected {expected:.15}")]
    SpinMagnitude {
        index: usize,
        magnitude: f64,
        expected: f64,
    },

    #[error("net charge {net:.3e} is not neutralized")]
    NonNeutral { net: f64 },

    #[error("unsupported {what}: {detail}")]
    Unsupported { what: &'static str, detail: String },

    #[error("quadrature not converged: doubling difference {diff:.3e}")]
    QuadratureNotConverged { diff: f64 },

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("run aborted after {completed} steps, output kept in {dir}: {source}")]
    RunAborted {
        dir: String,
        completed: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

use std::path::PathBuf;

/// Errors raised across the simulator, trainer and estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("momentum comb truncated: edge population {max_edge_population:.3e} exceeds 1e-6")]
    Truncation { max_edge_population: f64 },

    #[error("momentum comb truncated at acceleration {accel}: edge population {max_edge_population:.3e}")]
    TruncationAtAccel {
        accel: f64,
        max_edge_population: f64,
    },

    #[error("wave packet reached the box edge: edge density {edge_density:.3e} exceeds 1e-4")]
    BoxOverflow { edge_density: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-finite loss at episode {episode}, step {step} (last finite loss {last_loss})")]
    NonFiniteLoss {
        episode: usize,
        step: usize,
        last_loss: f64,
    },

    #[error("posterior vanished after {measurements} measurements")]
    DegenerateEvidence { measurements: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Each variant maps onto one of the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (bad coordinates, degenerate geometry, empty layer).
    #[error("domain error: {0}")]
    Domain(String),

    /// A criterion specification that cannot be normalized or classified.
    #[error("specification error in criterion `{criterion}`: {message}")]
    Spec { criterion: String, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed or inconsistent input data (layers, rasters, instances).
    #[error("input error: {0}")]
    Input(String),

    /// Configuration problem, located by a field path such as `criteria[3].bands`.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A comparison matrix failed the consistency gate.
    #[error("consistency gate failed for matrix `{node}`: CR = {cr:.6} >= threshold {threshold}")]
    Gate { node: String, cr: f64, threshold: f64 },

    /// The exact solver refused an instance over its size cap.
    #[error("solver refused: {0}")]
    SolverRefused(String),

    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the cause with the stage name.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn spec(criterion: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            criterion: criterion.into(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code: 2 validation, 3 solver refusal, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::SolverRefused(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

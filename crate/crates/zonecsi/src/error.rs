//! Crate-wide error type. Every fallible operation in the toolkit returns
//! [`Result`]; variants carry enough context to act on (line numbers for
//! parse failures, stage names for pipeline ordering problems).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene parse error at line {line}: {msg}")]
    SceneParse { line: usize, msg: String },

    #[error("plane {index} is not coplanar within {tol} m (max deviation {max_dev:.3e} m)")]
    NonCoplanar { index: usize, max_dev: f64, tol: f64 },

    #[error("plane {index} is invalid: {msg}")]
    InvalidPlane { index: usize, msg: String },

    #[error("unknown material id `{0}`")]
    UnknownMaterial(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("effective channel is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("stage `{stage}` needs artifact `{artifact}`; run `{producer}` first")]
    MissingArtifact {
        stage: String,
        artifact: String,
        producer: String,
    },

    #[error(
        "artifacts of stage `{stage}` were produced under a different configuration; \
         re-run `{stage}` (or pass --force to use them anyway)"
    )]
    StaleArtifact { stage: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

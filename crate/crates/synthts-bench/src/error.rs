//! Error type shared across the toolkit.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("checksum failure for {path}: expected {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("class {class} has no samples in the {role} set")]
    EmptyClass { class: usize, role: &'static str },

    #[error("synthetic pool shortfall: {}", format_deficits(.deficits))]
    PoolShortfall { deficits: Vec<(usize, usize)> },

    #[error("dataset fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

fn format_deficits(deficits: &[(usize, usize)]) -> String {
    deficits
        .iter()
        .map(|(class, missing)| format!("class {class} needs {missing} more sample(s)"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class: 1 usage, 2 data/validation, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            Error::Internal(_) => 3,
            _ => 2,
        }
    }
}

use std::path::PathBuf;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-conditioned least-squares system (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite objective: {0}")]
    NonFinite(String),

    /// The restoration solver could not decrease its objective; the trace up to
    /// the failure is attached.
    #[error("restoration diverged after {} recorded objectives", trace.len())]
    Diverged { trace: Vec<f64> },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A per-item failure inside a corpus operation.
    #[error("{id}: {source}")]
    Item {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the identifier of the item it belongs to.
    pub fn for_item(self, id: impl Into<String>) -> Self {
        Error::Item {
            id: id.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the CLI: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Item { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    /// Malformed or schema-violating configuration. `line` is 0 when the
    /// offending key cannot be located in the source text.
    #[error("{}{}: {message}", path.display(), if *line > 0 { format!(":{line}") } else { String::new() })]
    Config { path: PathBuf, line: usize, message: String },

    /// Malformed input data file (matrix text, CSV).
    #[error("{}: line {line}: {message}", path.display())]
    Format { path: PathBuf, line: usize, message: String },

    #[error("{context}: {source}")]
    Numerical {
        context: &'static str,
        source: sagnac_core::Error,
    },

    #[error("{failed} of {total} invariant checks failed")]
    Invariant { failed: usize, total: usize },
}

impl Error {
    /// Process exit code: 1 config or input error, 2 numerical failure,
    /// 3 invariant failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Config { .. } | Error::Format { .. } => 1,
            Error::Numerical { .. } => 2,
            Error::Invariant { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Attaches a context label to core errors.
pub(crate) trait Context<T> {
    fn context(self, context: &'static str) -> Result<T>;
}

impl<T> Context<T> for sagnac_core::Result<T> {
    fn context(self, context: &'static str) -> Result<T> {
        self.map_err(|source| Error::Numerical { context, source })
    }
}

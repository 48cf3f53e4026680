use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate operator: {0}")]
    DegenerateOperator(String),

    #[error("degenerate regularization: {0}")]
    DegenerateRegularization(String),

    #[error("svd did not converge for operator {0}")]
    Svd(String),

    #[error("spectral filter undefined: {0}")]
    FilterDomain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gradient backend `{backend}` is not available for solver `{solver}`")]
    Backend { backend: String, solver: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("search failed: {0}")]
    Search(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Compute,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_)
            | Error::Dimension { .. }
            | Error::FilterDomain(_)
            | Error::Backend { .. }
            | Error::NotApplicable(_)
            | Error::Contract(_)
            | Error::Config(_) => ErrorClass::Validation,
            Error::DegenerateOperator(_)
            | Error::DegenerateRegularization(_)
            | Error::Svd(_)
            | Error::Numerical(_)
            | Error::Search(_) => ErrorClass::Compute,
            Error::Format { .. } | Error::Io { .. } => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
        }
    }

    /// Process exit code: 1 validation, 2 compute, 3 io.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 1,
            ErrorClass::Compute => 2,
            ErrorClass::Io => 3,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

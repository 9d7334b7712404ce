use thiserror::Error;

/// Errors produced by the filter library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Shapes of the operands do not conform.
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension { context: &'static str, detail: String },

    /// A caller-supplied value violates an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Symmetric factorization failed at every jitter level.
    #[error("factorization of {context} failed after jitter levels {attempted:?}")]
    Factorization {
        context: String,
        attempted: Vec<f64>,
    },

    /// Invalid run configuration; `key` is the dotted key path.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A filter step failed.
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }

    /// Prefixes the context of a factorization error, leaves others untouched.
    pub(crate) fn in_block(self, block: &str) -> Self {
        match self {
            Error::Factorization { context, attempted } => Error::Factorization {
                context: format!("{block}: {context}"),
                attempted,
            },
            other => other,
        }
    }

    /// True for errors caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Factorization { .. } => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

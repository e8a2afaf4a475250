use thiserror::Error;

/// Errors produced by the factorization library.
#[derive(Debug, Error)]
pub enum DsfError {
    /// Operand shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside the operation's domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iteration or factorization broke down.
    #[error("numerical failure in {what} (residual {residual:.3e})")]
    Numerical { what: &'static str, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A binary container failed validation.
    #[error("corrupt file: {0}")]
    Format(String),
}

impl DsfError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        DsfError::Shape(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        DsfError::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, DsfError>;

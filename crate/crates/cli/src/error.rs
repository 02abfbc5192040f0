use std::fmt;

use forcedmech_core::{Error as MathError, ExprError};

/// Located syntax or validation failure in a system file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{error}")]
    Parse { path: String, error: SyntaxError },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("indeterminate verdict: {0}")]
    Indeterminate(String),
}

impl CliError {
    /// 1 for input problems, 2 for failed mathematical preconditions, 3 for
    /// indeterminate verdicts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Io(..) | CliError::Usage(_) => 1,
            CliError::Math(MathError::Indeterminate(_))
            | CliError::Math(MathError::Expr(ExprError::Indeterminate { .. }))
            | CliError::Indeterminate(_) => 3,
            CliError::Math(_) => 2,
        }
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::Math(e.into())
    }
}

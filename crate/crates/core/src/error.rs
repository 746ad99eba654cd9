//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value outside the documented domain of an
    /// operation (negative invariant, mismatched field/space, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration file or run setup is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// A file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The mesh violates a structural requirement (conformity, orientation,
    /// boundary tagging).
    #[error("mesh error: {0}")]
    Mesh(String),

    /// A linear operator that must be invertible is (numerically) singular,
    /// or a discrete stability constant degenerated.
    #[error("singular system: {0}")]
    Singular(String),

    /// An iterative solve exhausted its budget or stopped making progress.
    #[error("{}", .0.describe())]
    NonConvergence(Box<NonConvergence>),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Details attached to a non-convergence failure: which loop gave up, how
/// far it got, and the residual trace so the caller can see whether the
/// iteration was diverging or merely slow.
#[derive(Debug, Clone)]
pub struct NonConvergence {
    pub what: String,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub suggestion: Option<String>,
}

impl NonConvergence {
    fn describe(&self) -> String {
        let last = self
            .residual_history
            .last()
            .map(|r| format!("{r:.3e}"))
            .unwrap_or_else(|| "n/a".to_string());
        let mut s = format!(
            "{} did not converge after {} iterations (last residual {})",
            self.what, self.iterations, last
        );
        if let Some(hint) = &self.suggestion {
            s.push_str("; ");
            s.push_str(hint);
        }
        s
    }
}

impl Error {
    pub fn non_convergence(
        what: impl Into<String>,
        iterations: usize,
        residual_history: Vec<f64>,
        suggestion: Option<String>,
    ) -> Self {
        Error::NonConvergence(Box::new(NonConvergence {
            what: what.into(),
            iterations,
            residual_history,
            suggestion,
        }))
    }

    /// Process exit code for the command line tool: 2 for anything the user
    /// can fix in the inputs, 3 for non-convergence, 4 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Mesh(_)
            | Error::Io(_) => 2,
            Error::NonConvergence(_) => 3,
            Error::Singular(_) | Error::Internal(_) => 4,
        }
    }

    /// Short machine-readable kind tag used in the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Mesh(_) => "mesh",
            Error::Singular(_) => "singular",
            Error::NonConvergence(_) => "non_convergence",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}

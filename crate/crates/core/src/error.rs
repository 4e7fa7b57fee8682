use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// Elimination met a pivot below the singularity threshold.
    #[error("singular matrix in {context}: pivot magnitude {pivot:e}")]
    Singular { context: String, pivot: f64 },

    #[error("Gamma function pole at {at}")]
    Pole { at: i64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("infeasible request: {0}")]
    Feasibility(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn singular(context: impl Into<String>, pivot: f64) -> Self {
        Error::Singular { context: context.into(), pivot }
    }

    /// Adds a step annotation to singularity errors, passes others through.
    pub(crate) fn at_step(self, step: impl std::fmt::Display) -> Self {
        match self {
            Error::Singular { context, pivot } => Error::Singular {
                context: format!("{context} (step {step})"),
                pivot,
            },
            other => other,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Error::Singular { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

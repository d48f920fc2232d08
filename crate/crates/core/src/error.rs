use thiserror::Error;

#[derive(Debug, Error)]
pub enum HscError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("rank d = {d} outside [0, {max}]")]
    RankOutOfRange { d: usize, max: usize },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("fading coefficient is zero")]
    ZeroFading,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },

    #[error("no adapter pair trained for d = {d}")]
    MissingAdapter { d: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HscError {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        HscError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        HscError::Format { what, detail: detail.into() }
    }

    /// True for failures of the numerics (divergence, convergence, degenerate
    /// values) as opposed to bad inputs or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HscError::NoConvergence { .. }
                | HscError::Divergence { .. }
                | HscError::ZeroVector
                | HscError::ZeroFading
                | HscError::NotSymmetric { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, HscError>;

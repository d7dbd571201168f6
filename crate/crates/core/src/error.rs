use thiserror::Error;

/// Errors raised by fitting, selection and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid response at row {row}: {reason}")]
    InvalidResponse { row: usize, reason: String },

    #[error("moment integral diverges for j = {j}")]
    MomentDivergence { j: usize },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("(p - nu) must be odd, got p = {p}, nu = {nu}")]
    UnsupportedParity { p: usize, nu: usize },

    #[error("degenerate constant: {0}")]
    DegenerateConstant(String),

    #[error("estimator does not exist at kappa = {kappa}: {reason}")]
    InfeasibleKappa { kappa: f64, reason: String },

    #[error("no feasible concentration on the grid for selector {selector}")]
    SelectionFailure { selector: String },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("model specification error: {0}")]
    ModelSpec(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("io error: {0}")]
    Io(String),
}

impl CircError {
    pub(crate) fn infeasible(kappa: f64, reason: impl Into<String>) -> Self {
        CircError::InfeasibleKappa {
            kappa,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            CircError::InvalidArgument(_)
                | CircError::InvalidResponse { .. }
                | CircError::InvalidDesign(_)
                | CircError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CircError>;

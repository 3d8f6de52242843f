use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CcpError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {msg}")]
    Validation { field: String, msg: String },
    #[error("scenario index {k} out of range (N = {n})")]
    Index { k: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported set for direct projection: {0}")]
    UnsupportedSet(String),
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, best: Vec<f64> },
    #[error("simplex iteration cap {cap} reached")]
    CycleGuardTripped { cap: usize },
    #[error("start point cannot be projected into the feasible set")]
    BadStart,
    #[error("objective became non-finite")]
    NonFinite,
    #[error("budget set X ∩ {{c'x <= {t}}} is empty")]
    InfeasibleBudget { t: f64 },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no chance-feasible lower-level solution for any t up to {cap}")]
    NoFeasibleT { cap: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("norm mismatch: {0}")]
    NormMismatch(String),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("enumeration size {count} exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
}

impl CcpError {
    pub fn validation(field: &str, msg: impl Into<String>) -> Self {
        CcpError::Validation { field: field.to_string(), msg: msg.into() }
    }

    /// Stable short tag used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CcpError::Parse(_) => "ParseError",
            CcpError::Validation { .. } => "ValidationError",
            CcpError::Index { .. } => "IndexError",
            CcpError::Dimension(_) => "DimensionError",
            CcpError::UnsupportedSet(_) => "UnsupportedSet",
            CcpError::NoConvergence { .. } => "NoConvergence",
            CcpError::CycleGuardTripped { .. } => "CycleGuardTripped",
            CcpError::BadStart => "BadStart",
            CcpError::NonFinite => "NonFinite",
            CcpError::InfeasibleBudget { .. } => "InfeasibleBudget",
            CcpError::BackendUnavailable(_) => "BackendUnavailable",
            CcpError::NoFeasibleT { .. } => "NoFeasibleT",
            CcpError::Infeasible(_) => "Infeasible",
            CcpError::Unbounded(_) => "Unbounded",
            CcpError::Domain(_) => "DomainError",
            CcpError::NormMismatch(_) => "NormMismatch",
            CcpError::ModeMismatch(_) => "ModeMismatch",
            CcpError::CapExceeded { .. } => "CapExceeded",
        }
    }

    /// True for errors meaning "no feasible answer" rather than bad input or limits.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            CcpError::NoFeasibleT { .. } | CcpError::Infeasible(_) | CcpError::InfeasibleBudget { .. }
        )
    }

    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            CcpError::CapExceeded { .. } | CcpError::NoConvergence { .. } | CcpError::CycleGuardTripped { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, CcpError>;

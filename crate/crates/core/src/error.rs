use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The number of k-subsets exceeds the configured budget.
    #[error("combinatorial budget exceeded: C({n}, {k}) = {count} > budget {budget}")]
    BudgetExceeded {
        n: usize,
        k: usize,
        count: u128,
        budget: usize,
    },

    /// The weighted minimum enclosing ball solver hit its iteration cap.
    #[error(
        "weighted MEB did not converge after {iterations} iterations (residual {residual:e}, best rad^2 {best_rad_sq}){}",
        simplex.as_ref().map(|s| format!(" on simplex {s:?}")).unwrap_or_default()
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best_center: Vec<f64>,
        best_rad_sq: f64,
        simplex: Option<Vec<usize>>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BudgetExceeded { .. } => "budget",
            Error::NoConvergence { .. } => "convergence",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code used by the experiment runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) => 2,
            Error::BudgetExceeded { .. } => 3,
            Error::NoConvergence { .. } => 4,
            Error::Config(_) | Error::DimensionMismatch { .. } => 5,
            Error::Contract(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

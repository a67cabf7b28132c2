use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by models, solvers and test pipelines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parameter {index} = {value} outside [{lo}, {hi}]")]
    OutOfDomain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("regressor {index} = {value} outside [{lo}, {hi}]")]
    RegressorOutOfDomain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },
    #[error("matrix singular to working precision (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("matrix not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("no convergence after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("no feasible step found")]
    InfeasibleStep,
    #[error("multiplier outside the feasible region")]
    InfeasibleLambda,
    #[error("zero escapes the convex hull of the estimating vectors (score residual {residual:.3e})")]
    ConvexHull { residual: f64 },
    #[error("least-squares fit did not converge after {iters} iterations (rss {rss:.6e})")]
    FitFailure {
        beta: Vec<f64>,
        rss: f64,
        iters: usize,
    },
    #[error("insufficient data: {got} usable rows, need at least {needed}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid selection probability {value}")]
    InvalidProbability { value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Short stable tag used when itemizing failures in simulation reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::RegressorOutOfDomain { .. } => "regressor-out-of-domain",
            Error::NonFinite { .. } => "non-finite",
            Error::Singular { .. } => "singular-matrix",
            Error::NotPsd { .. } => "not-psd",
            Error::NoConvergence { .. } => "no-convergence",
            Error::InfeasibleStep => "infeasible-step",
            Error::InfeasibleLambda => "infeasible-lambda",
            Error::ConvexHull { .. } => "convex-hull",
            Error::FitFailure { .. } => "fit-failure",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::InvalidProbability { .. } => "invalid-probability",
            Error::InvalidArgument(_) => "invalid-argument",
        }
    }
}

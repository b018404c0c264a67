use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant onto an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid field: D = {0} must be a squarefree positive integer")]
    InvalidField(i64),

    #[error("modulus must be nonzero")]
    ZeroModulus,

    #[error("division by zero")]
    DivisionByZero,

    #[error("cannot parse element {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("epsilon {eps} is not admissible (must lie in ({floor}, 1))")]
    InadmissibleEpsilon { eps: f64, floor: f64 },

    #[error("rational point reached at step {step}: input lies in K or precision is exhausted")]
    RationalPointReached { step: usize },

    #[error("no candidate (a, b) satisfies the residual bound at step {step} (best residual {best})")]
    StepInfeasible { step: usize, best: f64 },

    #[error("invariant violated: {what} at index {index}")]
    InvariantViolation { what: String, index: usize },

    #[error("argument {0} lies on a lattice point (pole)")]
    Pole(String),

    #[error("requested precision {requested:e} is tighter than the certifiable floor {floor:e}")]
    PrecisionUnavailable { requested: f64, floor: f64 },

    #[error("normalization undefined: E2(0) vanishes for D = {0}")]
    NormalizationUndefined(u64),

    #[error("resource budget exceeded: N(c) = {norm} > budget {budget}")]
    BudgetExceeded { norm: String, budget: u64 },

    #[error("matrix is not invertible over O_K (determinant {0})")]
    NotInvertible(String),

    #[error("matrix entries are not all in O_K")]
    NotIntegral,

    #[error("search failed: {0}")]
    SearchFailure(String),

    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

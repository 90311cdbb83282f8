use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("unknown catalog entry '{name}' (expected one of: {expected})")]
    UnknownName { name: String, expected: String },

    #[error("missing or invalid parameter '{param}' for '{entry}': {reason}")]
    BadParameter { entry: String, param: String, reason: String },

    #[error("flow divergence {divergence:.3e} at node ({i}, {j}) exceeds tolerance {tolerance:.3e}")]
    Divergence {
        i: usize,
        j: usize,
        divergence: f64,
        tolerance: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("eigen iteration stagnated after {iterations} iterations (last residuals {history:?})")]
    EigenStagnation { iterations: usize, history: Vec<f64> },

    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("bounds sandwich violated: lower {lower:.6} <= lambda* {lambda_star:.6} <= upper {upper:.6} fails")]
    Sandwich { lower: f64, lambda_star: f64, upper: f64 },

    #[error("seed ({x}, {y}) lies on a separatrix (|psi| = {value:.3e} <= {eps:.3e})")]
    SeedOnSeparatrix { x: f64, y: f64, value: f64, eps: f64 },

    #[error("seeds {first} and {second} fall in the same cell")]
    AmbiguousCells { first: usize, second: usize },

    #[error("cell {0} violates the single-extremum assumption: {1}")]
    MultiExtremum(usize, String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

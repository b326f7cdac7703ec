use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    /// The iterative mean solver ran out of iterations. Carries the last
    /// iterate (flattened coordinates) and the gradient norm reached.
    #[error(
        "solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})"
    )]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("weights are degenerate: {0}")]
    DegenerateWeights(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("invalid adjacency matrix: {0}")]
    InvalidAdjacency(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("RSS is zero at theta = {theta}; the log-RSS criterion is undefined there, use the rss criterion")]
    ZeroRss { theta: usize },

    #[error("candidate period {theta}, phase {phase}: {source}")]
    Candidate {
        theta: usize,
        phase: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation failed ({invariant}): {message}")]
    Validation { invariant: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised by the numerical solvers rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Convergence { .. }
            | Error::DegenerateConfiguration(_)
            | Error::ZeroRss { .. } => true,
            Error::Candidate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidPoint(_) => "invalid_point",
            Error::Convergence { .. } => "convergence",
            Error::DegenerateWeights(_) => "degenerate_weights",
            Error::DegenerateConfiguration(_) => "degenerate_configuration",
            Error::InvalidComposition(_) => "invalid_composition",
            Error::InvalidAdjacency(_) => "invalid_adjacency",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidRegularizer(_) => "invalid_regularizer",
            Error::ZeroRss { .. } => "zero_rss",
            Error::Candidate { source, .. } => source.kind(),
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn validation(invariant: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            invariant: invariant.to_string(),
            message: message.into(),
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attention row {row} of matrix {matrix} is not a probability distribution (sum {sum})")]
    NotRowStochastic { matrix: usize, row: usize, sum: f64 },

    #[error("aggregated attention row {0} has zero norm")]
    ZeroAttentionRow(usize),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("ADMM iterate became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("reference glasso did not converge after {sweeps} sweeps (duality gap {gap:e})")]
    GlassoNotConverged { sweeps: usize, gap: f64 },

    #[error("no candidate k produced a converged fit")]
    SelectionFailed,

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("malformed CSV at row {row}, column {column}: {message}")]
    MalformedCsv { row: usize, column: usize, message: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for the error family.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::ProbabilityOutOfRange(_) => "probability_out_of_range",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotRowStochastic { .. } => "not_row_stochastic",
            Error::ZeroAttentionRow(_) => "zero_attention_row",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Diverged { .. } => "diverged",
            Error::GlassoNotConverged { .. } => "glasso_not_converged",
            Error::SelectionFailed => "selection_failed",
            Error::InfeasibleScenario(_) => "infeasible_scenario",
            Error::MalformedCsv { .. } => "malformed_csv",
            Error::Format(_) => "malformed_input",
            Error::Io(_) => "io",
            Error::Json(_) => "malformed_json",
        }
    }
}

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("explicit path budget exceeded: {required} coordinates requested, budget is {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("training diverged (non-finite loss) at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    #[error("zero training error was not achieved; refusing to report support vectors")]
    ZeroTrainingErrorNotReached,

    #[error("data is not separable in the embedding: {0}")]
    NonSeparable(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("path products are inconsistent with the skeleton: {0}")]
    Inconsistent(String),

    #[error("neuron is unreachable through a nonzero path: {0}")]
    Unreachable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("malformed file at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("unknown dataset generator `{0}`")]
    UnknownGenerator(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps `self` with the name of the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command line front end.
    ///
    /// 2 validation, 3 gated refusal, 4 non-separability, 5 budget refusal,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InvalidConfig(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidInput(_)
            | Error::OutOfRange(_)
            | Error::Format { .. }
            | Error::UnknownGenerator(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Precondition(_) => 2,
            Error::ZeroTrainingErrorNotReached => 3,
            Error::NonSeparable(_) => 4,
            Error::BudgetExceeded { .. } => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

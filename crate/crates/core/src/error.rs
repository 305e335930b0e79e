use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskIdError {
    #[error("task id must be 18 characters, got {0}")]
    WrongLength(usize),
    #[error("task id has a non-digit character at position {0}")]
    NonDigitCharacter(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("field count {0} outside [{min}, {max}]", min = crate::domain::CORE_FIELD_COUNT, max = crate::datagen::MAX_FIELD_COUNT)]
    FieldCountOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("every value in the column is missing")]
    AllValuesMissing,
    #[error("column is empty")]
    EmptyColumn,
    #[error("quantile must lie in (0, 1), got {0}")]
    InvalidQuantile(f64),
    #[error("actual minutes must be positive, got {0}")]
    NonPositiveActual(f64),
    #[error("timestamps are not sorted at position {0}")]
    UnsortedInput(usize),
    #[error("record {0} has no priority; impute before encoding")]
    MissingPriority(u64),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("column `{0}` not found")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("dataset slice is empty")]
    EmptySlice,
    #[error("task queue is empty")]
    EmptyQueue,
    #[error("worker index {index} out of range for {workers} workers")]
    InvalidWorkerIndex { index: usize, workers: usize },
    #[error("oracle search space of {0} sequences exceeds the limit")]
    StateTooLarge(u64),
    #[error("record {0} has no observable priority")]
    MissingPriority(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("confusion counts are all zero")]
    EmptyCounts,
    #[error("ROC needs both positive and negative labels")]
    SingleClassLabels,
    #[error("scores and labels differ in length")]
    LengthMismatch,
    #[error("baseline mean completion time is zero")]
    ZeroBaseline,
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error("evaluation totals do not reconcile: {0}")]
    Conservation(String),
}

/// Crate-level error used by pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    TaskId(#[from] TaskIdError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("config error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

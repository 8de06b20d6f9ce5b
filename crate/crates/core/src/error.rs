use thiserror::Error;

/// Failure while reading one of the line-oriented input formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{source_name}:{line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        source_name: &'static str,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}:{line}: empty field {field}")]
    EmptyField {
        source_name: &'static str,
        line: usize,
        field: usize,
    },
    #[error("{source_name}:{line}: invalid number {value:?}")]
    Number {
        source_name: &'static str,
        line: usize,
        value: String,
    },
    #[error("{source_name}:{line}: {message}")]
    Invalid {
        source_name: &'static str,
        line: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// Failure of an answer provider probe.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider call for ({subject}, {relation}) failed: {message}")]
    Transport {
        subject: String,
        relation: String,
        message: String,
    },
    #[error("provider budget exhausted before probing ({subject}, {relation})")]
    BudgetExhausted { subject: String, relation: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training data contains a single class ({positives} positive, {negatives} negative)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("no training examples")]
    Empty,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("feature vector has {found} entries, model expects {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("truth set is empty")]
    EmptyTruth,
    #[error("no queries to average")]
    NoQueries,
    #[error("relation {relation} has {available} distinct subjects, need {requested}")]
    InsufficientSubjects {
        relation: String,
        available: usize,
        requested: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("cannot combine an empty list of rule confidences")]
    EmptyScores,
    #[error("configuration error: {0}")]
    MissingModel(&'static str),
    #[error("lambda is undefined when both MAP values are zero")]
    ZeroPerformance,
    #[error("lambda must be in [0, 1], got {0}")]
    LambdaRange(f64),
    #[error("MAP values must be non-negative")]
    NegativePerformance,
}

impl From<BaselineError> for EvalError {
    fn from(e: BaselineError) -> Self {
        EvalError::Config(e.to_string())
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing CSV column `{0}`")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("value {value} lies outside the closed bin range [{lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("bin index {index} out of range for {bins} bins")]
    InvalidBin { index: usize, bins: usize },
    #[error("invalid bin scheme: {0}")]
    InvalidScheme(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("too few complete cases: have {have}, need {need}")]
    TooFewCases { have: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing value for predictor `{0}`")]
    MissingPredictor(String),
    #[error("regression sigma must be positive")]
    NonPositiveSigma,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("parent graph has a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("predictor `{predictor}` of node `{node}` is not one of its parents")]
    PredictorNotParent { node: String, predictor: String },
    #[error("node `{node}` needs {rows} CPT rows, limit is {limit}")]
    TooManyRows { node: String, rows: usize, limit: usize },
    #[error("case {index} has no state for `{node}`")]
    IncompleteCase { index: usize, node: String },
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("evidence has zero probability")]
    InconsistentEvidence,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("`{0}` is reserved and cannot be declared as a variable")]
    ReservedName(String),
    #[error("invalid arrows value {0}; expected 1 or 2")]
    InvalidArrows(u8),
    #[error("two-headed path cannot involve `one`")]
    TwoHeadedOne,
    #[error("label `{0}` refers to a definition variable and cannot be free")]
    FreeDefinitionLabel(String),
    #[error("definition variable `{0}` was not declared")]
    UndeclaredDefinitionVariable(String),
    #[error("free cell at {0} has no label")]
    UnlabeledFreeCell(String),
    #[error("label `{0}` is used on both free and fixed cells")]
    ConflictingFreeFlags(String),
    #[error("missing value for free parameter `{0}`")]
    MissingParameter(String),
    #[error("definition variable `{0}` has no value for this row")]
    MissingDefinitionValue(String),
    #[error("(I - A) is singular at these parameter values")]
    SingularIMinusA,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("threshold ordering violated for `{0}`")]
    ThresholdOrder(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("dimension {dim} exceeds the ordinal integration limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("invalid integration bounds: {0}")]
    InvalidBounds(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

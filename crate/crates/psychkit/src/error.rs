//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // --- input / dataset ---
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("duplicate student id `{0}`")]
    DuplicateStudentId(String),
    #[error("row {row} (student `{student_id}`), column {column}: invalid cell `{value}` (expected 0 or 1)")]
    InvalidCell {
        row: usize,
        student_id: String,
        column: String,
        value: String,
    },
    #[error("row {row} (student `{student_id}`), column {column}: missing response")]
    MissingCell {
        row: usize,
        student_id: String,
        column: String,
    },
    #[error("excluded item(s) not present in the file: {0}")]
    UnknownExcludedItem(String),
    #[error("unknown grouping column `{0}`")]
    UnknownGroupingColumn(String),
    #[error("config: {0}")]
    Config(String),

    // --- shape guards shared by the analysis modules ---
    #[error("need at least {min} {what}, found {found}")]
    TooFew {
        what: &'static str,
        min: usize,
        found: usize,
    },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // --- inference ---
    #[error("empty group `{0}`")]
    EmptyGroup(String),
    #[error("empty cell in factorial design: {0}")]
    EmptyDesignCell(String),
    #[error("p-value out of [0,1]: {0}")]
    InvalidPValue(f64),
    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    // --- irt ---
    #[error("degenerate item column `{0}` (every response identical)")]
    DegenerateItem(String),
    #[error("models are not nested ({small} vs {large})")]
    NotNested { small: String, large: String },
    #[error("item sets differ between the two models")]
    MismatchedItems,
    #[error("model does not match the matrix: {0}")]
    IncompatibleModel(String),

    // --- dif ---
    #[error("expected exactly two groups: {0}")]
    NotTwoGroups(String),
    #[error("anchor set is empty")]
    EmptyAnchorSet,
    #[error("group `{group}` has {found} rows, fewer than the required {min}")]
    GroupTooSmall {
        group: String,
        found: usize,
        min: usize,
    },

    // --- io / serialization ---
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

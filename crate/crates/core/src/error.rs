use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("empty document: record has neither a title nor any text")]
    EmptyDocument,

    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateUnitId(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("no trainable instances: every question was discarded")]
    NoTrainableInstances,

    #[error("empty dev set")]
    EmptyDevSet,

    #[error("question not present in dataset: `{0}`")]
    MissingQuestion(String),

    #[error("unknown unit id `{0}`")]
    UnknownUnit(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operation requires a trainable encoder")]
    NotTrainable,
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse { .. } => "parse",
            Error::MalformedRecord(_) => "malformed_record",
            Error::EmptyDocument => "empty_document",
            Error::DuplicateDocId(_) => "duplicate_doc_id",
            Error::DuplicateUnitId(_) => "duplicate_unit_id",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyBatch => "empty_batch",
            Error::NoTrainableInstances => "no_trainable_instances",
            Error::EmptyDevSet => "empty_dev_set",
            Error::MissingQuestion(_) => "missing_question",
            Error::UnknownUnit(_) => "unknown_unit",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::NotTrainable => "not_trainable",
        }
    }
}

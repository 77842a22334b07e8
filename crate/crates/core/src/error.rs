use thiserror::Error;

use crate::schema::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point relation `{0}`")]
    UnknownPointRelation(String),

    #[error("unknown point pair `{0}`")]
    UnknownPointPair(String),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("improper interval (start must precede end): {0}")]
    ImproperInterval(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate relation name `{0}`")]
    DuplicateRelationName(String),

    #[error("schema `{0}` declares no relations")]
    EmptySchema(String),

    #[error("schema `{}` failed validation: {}", .0.schema, .0.summary())]
    Validation(Box<ValidationReport>),

    #[error("unknown relation `{relation}`{}", context_suffix(.context))]
    UnknownRelation {
        relation: String,
        context: Option<String>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: gold has {gold} labels, predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("record `{id}` has split `{split}`; only train records may be augmented")]
    SplitViolation { id: String, split: String },

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { expected: u32, found: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn unknown_relation(relation: impl Into<String>) -> Self {
        Error::UnknownRelation {
            relation: relation.into(),
            context: None,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Stable short name of the variant, used in reports and host bindings.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnknownPointRelation(_) => "UnknownPointRelation",
            Error::UnknownPointPair(_) => "UnknownPointPair",
            Error::ProbabilityOutOfRange(_) => "DomainError",
            Error::ImproperInterval(_) => "ImproperInterval",
            Error::Parse { .. } => "ParseError",
            Error::DuplicateRelationName(_) => "DuplicateRelationName",
            Error::EmptySchema(_) => "EmptySchema",
            Error::Validation(_) => "ValidationError",
            Error::UnknownRelation { .. } => "UnknownRelation",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyDataset => "EmptyDataset",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::DuplicateId(_) => "DuplicateId",
            Error::SplitViolation { .. } => "SplitViolation",
            Error::CheckpointVersion { .. } => "CheckpointVersion",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

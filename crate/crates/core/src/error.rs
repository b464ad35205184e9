use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("no valid rows were accepted ({rejected} rejected)")]
    NoValidRows { rejected: usize },

    #[error("schema mismatch between merged parts: {0}")]
    SchemaMismatch(String),

    #[error("column `{0}` is unknown")]
    UnknownColumn(String),

    #[error("column `{0}` is not categorical")]
    NotCategorical(String),

    #[error("unseen value `{value}` in column `{column}`")]
    UnseenCategory { column: String, value: String },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature names do not match the model's training features")]
    FeatureNameMismatch,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("label {0} is not among the known classes")]
    UnknownLabel(u32),

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("rule file line {line}: {message}")]
    RuleSyntax { line: usize, message: String },

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Attach a pipeline stage name to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

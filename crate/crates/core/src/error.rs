use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One rejected row of an input table.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RowError {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("outcome `{label}` has zero predicted probability; the log score is -inf")]
    ZeroProbability { label: String },

    #[error("group `{group}` has no ground-truth positives")]
    EmptyPositiveClass { group: String },

    #[error("unsupported fairness measure `{0}`")]
    UnsupportedMeasure(String),

    #[error("utility `{kind}` is undefined at measure value {value}")]
    UtilityUndefinedAtOptimum { kind: &'static str, value: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{} bad row(s) in input{}", .errors.len(), first_row_suffix(.errors))]
    BadRows { errors: Vec<RowError> },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn first_row_suffix(errors: &[RowError]) -> String {
    match errors.first() {
        Some(e) => format!(" (first at row {}: {})", e.row, e.message),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

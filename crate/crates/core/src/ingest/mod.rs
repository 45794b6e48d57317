//! File formats: token dumps in, surveys in and out, reports out.

pub mod dump;
pub mod report;
pub mod survey;

use std::io;

use thiserror::Error;

pub use dump::{
    parse_dump, write_dump, DumpFile, DumpHeader, DumpRecord, DumpToken, FORMAT_VERSION,
};
pub use report::{fmt_sig6, HistogramMode, OutputHeader, ReportFormat};
pub use survey::{
    clean_survey, read_survey_csv, write_survey_csv, CleaningStats, RawSurveyQuestion,
    REFUSAL_OPTIONS,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },

    #[error("line {line}: validation error: {message}")]
    Validation { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Schema { line, .. } | IngestError::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }
}

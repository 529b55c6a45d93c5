use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("a nine-grid set needs exactly 9 images, found {found}")]
    SetSize { found: usize },

    #[error("duplicate image id `{0}`")]
    DuplicateId(String),

    #[error("scores for set `{set_id}` are incomplete; missing {missing:?}")]
    IncompleteScores {
        set_id: String,
        missing: Vec<String>,
    },

    #[error("duplicate score for image `{0}`")]
    DuplicateScore(String),

    #[error("invalid score for image `{id}`: {reason}")]
    InvalidScore { id: String, reason: String },

    #[error("external scorer failed: {0}")]
    ScorerFailed(String),

    #[error("set mismatch: {0}")]
    SetMismatch(String),

    #[error("not enough image sets: need {needed}, have {available}")]
    InsufficientSets { needed: usize, available: usize },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("question {question_index} was already answered in session `{session_id}`")]
    AlreadyAnswered {
        session_id: String,
        question_index: usize,
    },

    #[error("invalid choice: slot {0} is not in 1..=4")]
    InvalidChoice(i64),

    #[error("ballots from more than one study: `{0}` and `{1}`")]
    MixedStudy(String, String),

    #[error("tally is empty")]
    EmptyTally,

    #[error("invalid study bundle: {0}")]
    BundleInvalid(String),

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used by the HTTP layer and `--json` output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::SetSize { .. } => "set_size",
            Error::DuplicateId(_) => "duplicate_id",
            Error::IncompleteScores { .. } => "incomplete_scores",
            Error::DuplicateScore(_) => "duplicate_score",
            Error::InvalidScore { .. } => "invalid_score",
            Error::ScorerFailed(_) => "scorer_failed",
            Error::SetMismatch(_) => "set_mismatch",
            Error::InsufficientSets { .. } => "insufficient_sets",
            Error::NotFound(_) => "not_found",
            Error::AlreadyAnswered { .. } => "already_answered",
            Error::InvalidChoice(_) => "invalid_choice",
            Error::MixedStudy(..) => "mixed_study",
            Error::EmptyTally => "empty_tally",
            Error::BundleInvalid(_) => "bundle_invalid",
            Error::Write { .. } => "write_error",
            Error::Io(_) => "io_error",
            Error::Image(_) => "image_error",
            Error::Json(_) => "json_error",
        }
    }
}

use std::path::PathBuf;

/// Failure modes across dataset handling, training, scoring and statistics.
///
/// Every variant carries a stable kebab-case [`code`](Error::code) so that
/// callers (and the CLI) can match on the kind without parsing messages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty-dataset: operation requires at least one example")]
    EmptyDataset,
    #[error("too-small-to-split: need at least 2 examples, got {0}")]
    TooSmallToSplit(usize),
    #[error("label-out-of-range: row {row}: label {label} with {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("unknown-class: row {row}: no class named {name:?}")]
    UnknownClass { row: usize, name: String },
    #[error("malformed-row: row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("invalid-scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid-dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error("dimension-mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate-tune-set: tune set must contain positive and negative examples")]
    DegenerateTuneSet,
    #[error("diverged: non-finite training loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid-probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("degenerate-labels: need both positive and negative labels")]
    DegenerateLabels,
    #[error("degenerate-variance: zero variance with non-zero AUC difference")]
    DegenerateVariance,
    #[error("non-finite-score: score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("length-mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("k-out-of-range: k = {k}, dataset has {n} examples")]
    KOutOfRange { k: usize, n: usize },
    #[error("no-ground-truth: example {0} has no true label")]
    NoGroundTruth(String),
    #[error("no-grader-ids: scored dataset carries no grader ids")]
    NoGraderIds,
    #[error("unknown-grader: {0}")]
    UnknownGrader(String),
    #[error("unknown-role: {0}")]
    UnknownRole(String),
    #[error("empty-pool: grader pool has no graders")]
    EmptyPool,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyDataset => "empty-dataset",
            Error::TooSmallToSplit(_) => "too-small-to-split",
            Error::LabelOutOfRange { .. } => "label-out-of-range",
            Error::UnknownClass { .. } => "unknown-class",
            Error::MalformedRow { .. } => "malformed-row",
            Error::InvalidScheme(_) => "invalid-scheme",
            Error::InvalidDataset(_) => "invalid-dataset",
            Error::InvalidConfig(_) => "invalid-config",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::DegenerateTuneSet => "degenerate-tune-set",
            Error::Diverged { .. } => "diverged",
            Error::InvalidProbabilities(_) => "invalid-probabilities",
            Error::DegenerateLabels => "degenerate-labels",
            Error::DegenerateVariance => "degenerate-variance",
            Error::NonFiniteScore(_) => "non-finite-score",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::KOutOfRange { .. } => "k-out-of-range",
            Error::NoGroundTruth(_) => "no-ground-truth",
            Error::NoGraderIds => "no-grader-ids",
            Error::UnknownGrader(_) => "unknown-grader",
            Error::UnknownRole(_) => "unknown-role",
            Error::EmptyPool => "empty-pool",
            Error::Fold { source, .. } => source.code(),
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// True for problems with inputs or configuration rather than computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidScheme(_)
                | Error::InvalidConfig(_)
                | Error::Io { .. }
                | Error::UnknownRole(_)
                | Error::UnknownClass { .. }
                | Error::LabelOutOfRange { .. }
                | Error::MalformedRow { .. }
                | Error::Csv(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_fold(self, fold: &'static str) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors produced by the toolkit. Every variant carries a stable
/// machine-parsable code so callers can branch without string matching.
#[derive(Debug, Error)]
pub enum HstfError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed capture: {0}")]
    MalformedCapture(String),

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unreadable label map: {0}")]
    LabelMap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("checkpoint does not match sample shapes: {0}")]
    CheckpointMismatch(String),

    #[error("insufficient samples: need {required} {class} but pool has {available}")]
    InsufficientData {
        class: &'static str,
        required: usize,
        available: usize,
    },

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("metrics require at least one sample of each class")]
    SingleClass,

    #[error("non-finite activation in {stage} at index {index}")]
    NonFinite { stage: &'static str, index: usize },

    #[error("training diverged: loss is not finite at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("unknown preset `{0}`; available: {1}")]
    UnknownPreset(String, String),

    #[error("sample overflow: direction has {count} messages (cap {cap}) under discard policy")]
    Overflow { count: usize, cap: usize },
}

impl HstfError {
    /// Stable error code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            HstfError::Io(_) => "HSTF-E001",
            HstfError::MalformedCapture(_) => "HSTF-E002",
            HstfError::MalformedRecord { .. } => "HSTF-E003",
            HstfError::LabelMap(_) => "HSTF-E004",
            HstfError::Config(_) => "HSTF-E005",
            HstfError::Serde(_) => "HSTF-E006",
            HstfError::CheckpointMismatch(_) => "HSTF-E007",
            HstfError::InsufficientData { .. } => "HSTF-E008",
            HstfError::EmptySplit(_) => "HSTF-E009",
            HstfError::SingleClass => "HSTF-E010",
            HstfError::NonFinite { .. } => "HSTF-E011",
            HstfError::Divergence { .. } => "HSTF-E012",
            HstfError::UnknownPreset(..) => "HSTF-E013",
            HstfError::Overflow { .. } => "HSTF-E014",
        }
    }
}

pub type Result<T> = std::result::Result<T, HstfError>;

use thiserror::Error;

/// Errors surfaced by the pipeline stages.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: malformed JSON record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: record is missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },

    #[error("no time bins with at least {min_active_users} active users; corpus is empty after filtering")]
    EmptyCorpus { min_active_users: usize },

    #[error("corpus has {got} retained bins but at least {required} are required")]
    ShortLifespan { got: usize, required: usize },

    #[error("lexicon `{path}`: {reason}")]
    BadLexicon { path: String, reason: String },

    #[error("no edge between `{a}` and `{b}`")]
    NoSuchEdge { a: String, b: String },

    #[error("user `{user}` active in bin {bin} but missing from its graph")]
    InconsistentGraph { user: String, bin: usize },

    #[error("dataset too small: {got} usable items, at least {required} required")]
    SmallData { got: usize, required: usize },

    #[error("missing prerequisite artifact `{path}`; run `{command}` first")]
    MissingArtifact { path: String, command: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("serialisation error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        PipelineError::InvalidInput(msg.into())
    }
}

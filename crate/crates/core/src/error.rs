use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("missing required config key `{0}`")]
    MissingField(String),

    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("step called on a finished episode (t={t})")]
    EpisodeDone { t: usize },

    #[error("expected {expected} joint actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("non-finite {0} in Q-update")]
    NonFinite(&'static str),

    #[error("no (m_t, a_t+1) pairs for UE {0} in the supplied traces")]
    EmptyTraces(usize),

    #[error("pearson correlation undefined: {0}")]
    Pearson(&'static str),

    #[error("snapshot memory_len is {found} but {expected} was requested")]
    MemoryLenMismatch { expected: usize, found: usize },

    #[error("unsupported {kind} format version {found} (expected {expected})")]
    FormatVersion {
        kind: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

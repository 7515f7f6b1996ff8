use std::path::PathBuf;

/// Errors surfaced by the simulator, trainers, and experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("training diverged: non-finite {what} at update {update}")]
    Divergence { what: &'static str, update: usize },

    #[error("instance too large for brute-force search: {users} users (max {max})")]
    OracleTooLarge { users: usize, max: usize },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

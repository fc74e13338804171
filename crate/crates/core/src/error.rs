//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by network construction, forward/backward passes, and
/// optimizer updates.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer `{layer}`: expected input shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("forward cache does not match this architecture (stale or from another network)")]
    StaleCache,
    #[error("layer `{layer}`: non-finite {what} encountered")]
    NonFinite { layer: String, what: &'static str },
    #[error("dropout mask set does not match the architecture's dropout sites")]
    MaskMismatch,
}

/// Errors raised by environments and the tabular exporter.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error("unknown flavour m{mode}d{difficulty} for {game}")]
    UnknownFlavour {
        game: String,
        mode: u32,
        difficulty: u32,
    },
    #[error("invalid action {action} (action count {count})")]
    InvalidAction { action: usize, count: usize },
    #[error("step called on a terminal episode")]
    Terminal,
    #[error("tabular export unsupported for this flavour: {0}")]
    NotTabular(String),
    #[error("invalid flavour string `{0}` (expected e.g. `mini_crossing:m0d0`)")]
    BadFlavourString(String),
}

/// Errors raised by checkpoint persistence.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic")]
    BadMagic,
    #[error("checkpoint format version {found} is newer than supported version {supported}")]
    VersionTooNew { found: u32, supported: u32 },
    #[error("checkpoint truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("tensor `{name}` shape {got:?} does not match descriptor shape {expected:?}")]
    TensorShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("checkpoint does not match architecture at layer `{0}`")]
    ArchMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Errors raised while parsing or validating experiment configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown profile `{0}` (expected `paper-parity` or `desk`)")]
    UnknownProfile(String),
}

/// Errors raised while training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("non-finite loss at update {update}; aborting run")]
    NonFiniteLoss { update: u64 },
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
}

/// Top-level error for harness runs.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run `{0}` already exists; refusing to overwrite")]
    RunExists(String),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

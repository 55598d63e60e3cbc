use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration constraints failed. Each entry names the
    /// field and the violated constraint.
    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty subset: {0}")]
    EmptySubset(&'static str),

    #[error("unsupported objective: {0}")]
    UnsupportedObjective(&'static str),

    /// The privacy mechanism has no finite guarantee (for example σ = 0).
    #[error("infinite privacy loss: {0}")]
    InfinitePrivacyLoss(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("noise calibration failed: achieved epsilon {achieved} exceeds target {target} after {escalations} doublings")]
    CalibrationFailed {
        target: f64,
        achieved: f64,
        escalations: u32,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("refusing to overwrite existing output {0} (use --force)")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

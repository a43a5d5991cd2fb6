use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence at step {step}: {reason}")]
    Divergence { step: u64, reason: String },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        history: Vec<crate::latent::EpochLoss>,
    },

    #[error("task {task} rejected: {reason}")]
    Rejected { task: u64, reason: String },

    #[error("campaign aborted: {0}")]
    CampaignAborted(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

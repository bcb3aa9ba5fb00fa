use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] csp_autodiff::AdError),
    #[error(transparent)]
    Csp(#[from] csp_core::CspError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("decoding: {0}")]
    Decode(String),
    #[error("non-finite loss at epoch {epoch} step {step}; diagnostic checkpoint at {path}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        path: String,
    },
    #[error("metrics: {0}")]
    Metrics(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

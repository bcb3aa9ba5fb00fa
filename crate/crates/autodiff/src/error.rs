use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {a:?} and {b:?}")]
    Shape {
        op: &'static str,
        a: Vec<usize>,
        b: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("softmax row {row} has no selectable entry")]
    NoSelectable { row: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

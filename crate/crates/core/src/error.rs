use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dataset id `{0}`")]
    UnknownDataset(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("colour pair {0}")]
    ColourPair(&'static str),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("index {index} out of range for a product of {total}")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("invalid concept vector: {0}")]
    InvalidConcepts(String),
    #[error("unsupported resolution {0}, expected 32 or 64")]
    InvalidResolution(usize),
    #[error("dataset of {requested} samples exceeds the cap of {cap}; use streaming generation")]
    TooLarge { requested: usize, cap: usize },
    #[error("invalid pair request: {0}")]
    InvalidPair(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown setup `{0}`")]
    UnknownSetup(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("sort error: {0}")]
    Sort(String),
    #[error("kind error: {0}")]
    Kind(String),
    #[error("recursion guard tripped (depth budget exceeded)")]
    DepthBudget,
}

impl Error {
    pub fn sort(msg: impl Into<String>) -> Self {
        Error::Sort(msg.into())
    }
    pub fn kind(msg: impl Into<String>) -> Self {
        Error::Kind(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

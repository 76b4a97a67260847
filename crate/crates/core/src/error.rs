use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("series too short for (d={order}, m={season}{}): T={len}", if *.first_order { ", first-order" } else { "" })]
    SeriesTooShort {
        order: usize,
        season: usize,
        first_order: bool,
        len: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value encountered at conjugate-gradient iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("refusing to materialize {what}: {size} entries exceeds cap of {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("no scoreable entries")]
    NothingToScore,

    #[error("malformed model archive: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular(_) | Error::NonFinite { .. })
    }
}

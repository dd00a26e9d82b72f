use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty state")]
    EmptyState,

    #[error("beam index {index} out of range (state has {count} qubus beams)")]
    BeamOutOfRange { index: usize, count: usize },

    #[error("identical beam indices ({0}, {0})")]
    IdenticalBeams(usize),

    #[error("party index {index} out of range (state has {count} parties)")]
    PartyOutOfRange { index: usize, count: usize },

    #[error("spatial mode {mode} out of range (ancilla has {modes} modes)")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("state has no ancilla register")]
    NoAncilla,

    #[error("state has no preparation (polarization) register")]
    NoPrepRegister,

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("beam {0} is correlated with other degrees of freedom and cannot be discarded")]
    BeamNotSeparable(usize),

    #[error("feedforward failed: {0}")]
    FeedforwardFailed(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}

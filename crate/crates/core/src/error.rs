use alloc::string::String;

use crate::data::Region;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in sample {row}")]
    NonFinite { row: usize },
    #[error("feature names differ: {0}")]
    FeatureMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("need at least {needed} samples, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("region `{0}` is empty or absent")]
    EmptyRegion(Region),
    #[error("duplicate region `{0}`")]
    DuplicateRegion(Region),
    #[error("dataset carries no region tags")]
    Untagged,
    #[error("need at least {needed} regions, have {have}")]
    TooFewRegions { needed: usize, have: usize },
    #[error("moment prediction is only defined for convex-blend mixing")]
    PooledMoments,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

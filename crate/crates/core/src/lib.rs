//! Feature-wise dataset mixing for reducing contextual bias in tabular
//! regression: synthetic data generation, noise augmentation, mixing,
//! SMOTE and reweighting baselines, four regressors, and the evaluation
//! statistics used to compare them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the
//! benchmark harness and the command-line tool live in `featmix`.

#![no_std]
extern crate alloc;

pub mod augment;
pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod ks;
pub mod mixing;
pub mod probe;
pub mod regressors;
pub mod seed;
pub mod synthgen;

pub use data::{Dataset, Region, Sample};
pub use error::{Error, Result};
pub use seed::SeedSpec;

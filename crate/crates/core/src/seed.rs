//! Labeled random substreams derived from a single master seed.
//!
//! Every stochastic stage asks for its own stream by label. The label is
//! hashed into the ChaCha stream id, so two stages never share randomness and
//! the values a stage sees do not depend on which other stages ran first.

use alloc::format;
use alloc::string::String;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StageRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_label: String,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_label: impl Into<String>) -> Self {
        Self {
            master_seed,
            stream_label: stream_label.into(),
        }
    }

    /// Derives a sub-stream, e.g. `cv` -> `cv/fold:3`.
    pub fn child(&self, label: impl core::fmt::Display) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_label: format!("{}/{}", self.stream_label, label),
        }
    }

    pub fn rng(&self) -> StageRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(fnv1a(self.stream_label.as_bytes()));
        rng
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

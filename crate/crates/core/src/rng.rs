//! Named random substreams derived from a single root seed.
//!
//! Each pipeline stage draws from its own stream, so changing how many
//! numbers one stage consumes never shifts the values another stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

/// Deterministic generator for the stage `name` under `root`.
pub fn substream(root: u64, name: &str) -> StageRng {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(name.as_bytes());
    let seed: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(seed)
}

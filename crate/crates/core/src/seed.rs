//! Per-stage seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a stable seed for `stage` from the master seed, so a stage can be
/// re-run on its own and draw the same random numbers.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(stage.as_bytes());
    hasher.update([0u8]);
    hasher.update(master.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_are_stable_and_distinct() {
        assert_eq!(stage_seed(7, "aggregate"), stage_seed(7, "aggregate"));
        assert_ne!(stage_seed(7, "aggregate"), stage_seed(7, "train"));
        assert_ne!(stage_seed(7, "aggregate"), stage_seed(8, "aggregate"));
    }
}

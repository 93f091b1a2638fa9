//! Seed derivation so every stochastic stage owns an independent, reproducible stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a child stream id into a base seed.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Named sub-streams, so independent consumers never share a seed by accident.
pub mod stream {
    pub const SPLIT: u64 = 0x0053_504c_4954;
    pub const CLASS_SPLIT: u64 = 0x0043_4c41_5353;
    pub const INIT: u64 = 0x494e_4954;
    pub const EPOCH: u64 = 0x0045_504f_4348;
    pub const BATCH: u64 = 0x0042_4154_4348;
    pub const VIEWS: u64 = 0x0056_4945_5753;
    pub const DROPOUT: u64 = 0x4452_4f50;
    pub const EPISODE: u64 = 0x4550_4953;
    pub const FINETUNE: u64 = 0x4649_4e45;
    pub const HEAD: u64 = 0x4845_4144;
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        assert_ne!(derive(1, stream::INIT), derive(1, stream::EPOCH));
        assert_ne!(derive(1, 0), derive(2, 0));
        assert_eq!(derive(42, 7), derive(42, 7));
    }
}

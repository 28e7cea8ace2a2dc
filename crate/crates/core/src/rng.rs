//! Independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels for the per-experiment streams.
pub mod labels {
    pub const ENV: &str = "env";
    pub const AGENT: &str = "agent";
    pub const EVAL: &str = "eval";
    pub const DATA: &str = "data-gen";
    pub const LABELER: &str = "labeler";
    pub const REPLAY: &str = "replay";
    pub const INIT: &str = "init";
}

/// Mixes a label into the master seed (FNV-1a then a splitmix64 finalizer).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}

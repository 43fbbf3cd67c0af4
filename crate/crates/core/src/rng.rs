//! Seed handling.
//!
//! Every random operation takes one `u64` seed. Independent substreams (per
//! epoch, per walk root, per subsystem) are ChaCha8 streams keyed by a mixed
//! seed and selected with `set_stream`, so they never overlap and can be
//! generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags separating the subsystems that share a user seed.
pub(crate) mod tag {
    pub const FAIRDROP: u64 = 0x6661_6972_6472_6f70;
    pub const EDGEDROP: u64 = 0x6564_6765_6472_6f70;
    pub const WALKS: u64 = 0x7761_6c6b_7300_0001;
    pub const SKIPGRAM: u64 = 0x736b_6970_6772_616d;
    pub const GCN: u64 = 0x6763_6e00_0000_0001;
    pub const NEGATIVES: u64 = 0x6e65_6761_7469_7665;
    pub const PROBE: u64 = 0x7072_6f62_6500_0001;
    pub const SPLIT: u64 = 0x7370_6c69_7400_0001;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of the generator keyed by `(seed, tag)`.
pub fn substream(seed: u64, tag: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag));
    rng.set_stream(index);
    rng
}

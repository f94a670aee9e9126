//! Seed derivation so that every stream of randomness (per record, per
//! liquid, per repeat) is independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used everywhere in the crate. ChaCha8 output is stable across
/// platforms and crate versions, which keeps results bit-reproducible.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into a fresh seed.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream tags. Distinct constants keep derived seeds for different
/// purposes from colliding when they share a base seed and index.
pub mod stream {
    pub const ENCODE: u64 = 0x656e_636f_6465;
    pub const TOPOLOGY: u64 = 0x746f_706f;
    pub const SCANLINE: u64 = 0x7363_616e;
    pub const READOUT: u64 = 0x7265_6164;
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const REPEAT: u64 = 0x7265_7065_6174;
}

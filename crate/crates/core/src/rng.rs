//! Seed hierarchy.
//!
//! Every random stream in the simulator is keyed by a master seed and a path
//! of tags (module tag, replication index, BS index, ...). Keys are mixed with
//! SplitMix64 so that streams with different keys are independent and a
//! stream's draws never depend on which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream.
pub type SimRng = ChaCha8Rng;

/// Module tags. Changing one module's tag never perturbs another's draws.
pub mod tag {
    pub const DEPLOY: u64 = 0x01;
    pub const REFLECTORS: u64 = 0x02;
    pub const TRAIN_WORLD: u64 = 0x10;
    pub const EVAL_WORLD: u64 = 0x11;
    pub const TUNE_WORLD: u64 = 0x12;
    pub const BLOCKAGE: u64 = 0x20;
    pub const SHADOWING: u64 = 0x21;
    pub const FADING: u64 = 0x22;
    pub const VOLUNTEERS: u64 = 0x23;
    pub const EXPLORATION: u64 = 0x30;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a master seed and a path of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Open the stream identified by `(master, path)`.
pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

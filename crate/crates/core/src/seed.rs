//! Deterministic substream derivation. Every random draw in an experiment comes
//! from a generator seeded by hashing the master seed with the coordinates of
//! the draw, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    System = 1,
    Schedule = 2,
    Disturbance = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` one word at a time.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn substream(master: u64, parts: &[u64], role: Role) -> ChaCha8Rng {
    let mut all = parts.to_vec();
    all.push(role as u64);
    ChaCha8Rng::seed_from_u64(derive(master, &all))
}

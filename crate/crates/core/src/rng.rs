//! Counter-style random streams keyed by `(seed, purpose, indices...)`.
//!
//! Every stochastic quantity in the crate draws from a stream whose key is a
//! pure function of the run seed and the logical position of the draw
//! (replication, subject, ...). Work can then be scheduled in any order or on
//! any number of threads without changing a single drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different quantities disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    Shift = 1,
    Subject = 2,
    Replication = 3,
    TieBreak = 4,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key path into a 64-bit value; order-sensitive.
pub fn derive_seed(seed: u64, tag: StreamTag, path: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(tag as u64));
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(GOLDEN)));
    }
    h
}

/// A ChaCha8 generator for the given key path.
pub fn keyed_stream(seed: u64, tag: StreamTag, path: &[u64]) -> ChaCha8Rng {
    let key = derive_seed(seed, tag, path);
    let mut bytes = [0u8; 32];
    let mut h = key;
    for chunk in bytes.chunks_exact_mut(8) {
        h = splitmix(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

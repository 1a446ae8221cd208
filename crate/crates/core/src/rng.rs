//! Seeded, splittable random streams.
//!
//! Every stochastic decision draws from a ChaCha8 stream selected by
//! `(seed, label)`, so each decision can be pinned independently of the
//! others and of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// FNV-1a, used to turn substream labels into stream ids.
pub fn label_id(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent stream for `label` under `seed`.
pub fn substream(seed: u64, label: &str) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_id(label));
    rng
}

/// Independent stream for item `index` of a labelled family (chains,
/// sweep cells, crops).
pub fn indexed_substream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(label_id(label).wrapping_add(index));
    rng
}

/// Derives a child seed for a named sub-task of a command.
pub fn child_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    substream(seed, label).next_u64()
}

//! Stable seed derivation for labeled, forkable RNG streams.
//!
//! Seeds are mixed with SplitMix64 so a child stream depends only on
//! `(parent, label, index)`. Adding trials or candidates never perturbs the
//! streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `label`, slot `index`, under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix(parent);
    for chunk in label.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = splitmix(h ^ u64::from_le_bytes(word));
    }
    h = splitmix(h ^ (label.len() as u64));
    splitmix(h ^ index)
}

/// Folds an arbitrary sequence of words into one seed.
pub fn mix_words(parent: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix(parent), |h, &w| splitmix(h ^ w))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(parent: u64, label: &str, index: u64) -> ChaCha8Rng {
    rng(derive(parent, label, index))
}

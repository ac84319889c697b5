//! Seed expansion and content hashing.
//!
//! All randomness in a run descends from one global seed. Each stage derives
//! its own stream with [`derive_seed`], so adding draws in one stage never
//! shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Counter-based derivation: `(seed, stage, index)` maps to an independent seed.
pub fn derive_seed(seed: u64, stage: &str, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    for b in stage.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ splitmix64(index))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 prefix (16 chars) over the given byte chunks.
pub fn content_hash<'a>(chunks: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut hasher = Sha256::new();
    for c in chunks {
        hasher.update((c.len() as u64).to_le_bytes());
        hasher.update(c);
    }
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Count for a fraction of `n` items: `ceil(fraction * n)`, guarded against
/// representation error (0.7 * 10 must give 7, not 8).
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let c = (raw - 1e-9).ceil();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(n)
    }
}

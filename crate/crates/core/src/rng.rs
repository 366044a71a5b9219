//! Seeded substream derivation.
//!
//! Every random object in the crate is drawn from a ChaCha8 stream whose
//! seed is mixed from a master seed and a list of context words (width,
//! block, layer, trial index, ...). Streams for distinct contexts are
//! decorrelated, and generation order cannot change values: a matrix drawn
//! for (seed, b, l) is the same whether it is produced first, last, or on
//! another thread.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-period mixer with good avalanche.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with context words into a single substream key.
pub fn mix(master: u64, words: &[u64]) -> u64 {
    let mut state = master ^ 0x6c62_272e_07bb_0142;
    let mut out = splitmix64(&mut state);
    for &w in words {
        state ^= w.wrapping_mul(0x2545_f491_4f6c_dd1d);
        out ^= splitmix64(&mut state);
    }
    out
}

/// Deterministic generator for a derived substream.
pub fn stream(master: u64, words: &[u64]) -> ChaCha8Rng {
    let key = mix(master, words);
    let mut seed = [0u8; 32];
    let mut state = key;
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

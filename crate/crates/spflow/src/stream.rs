//! Counter-based RNG streams: every (run, step, particle) tuple derives its
//! own generator from the master seed, so results do not depend on thread
//! count or iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent stream from the master seed and a tag path.
pub fn stream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = master ^ 0x6a09e667f3bcc909;
    for &t in tags {
        state = splitmix64(&mut state) ^ t.wrapping_mul(0x9e3779b97f4a7c15);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

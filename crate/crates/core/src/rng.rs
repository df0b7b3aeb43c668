//! Deterministic random streams.
//!
//! Every Monte-Carlo trial owns a ChaCha8 stream keyed by the master seed and
//! the trial's coordinates, so results do not depend on execution order.

#[allow(unused_imports)] // shadowed by std methods when dev-dependencies link std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for the stream identified by `master_seed` and a path of indices.
pub fn stream_rng(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = master_seed;
    let mut acc = splitmix64(&mut state);
    for &id in path {
        state ^= acc.rotate_left(17) ^ id.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        acc = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Draw from CN(0, variance): independent real and imaginary parts, each
/// with variance `variance / 2`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

//! Seeded randomness with per-purpose substreams.
//!
//! Each run owns one counter-based ChaCha stream per purpose (initial point,
//! batch sampling, gradient noise). Draws for one purpose never shift the
//! draws of another, so extending a run by more iterations, or turning the
//! noise off, leaves earlier batch selections untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::types::RunSeed;

/// What a substream is consumed for. The discriminant doubles as the ChaCha
/// stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init = 0,
    Batch = 1,
    Noise = 2,
}

/// Deterministic substream for `(seed, purpose)`.
pub fn substream(seed: RunSeed, purpose: Purpose) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.0);
    rng.set_stream(purpose as u64);
    rng
}

/// Uniform size-`m` subset of `{0, …, n-1}` without duplicates (Floyd's
/// sampling; consumes exactly `m` draws, or none for a full batch).
pub fn sample_batch(n: usize, m: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "batch size must satisfy 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    if m == n {
        return Ok((0..n).collect());
    }
    let mut picked = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::with_capacity(2 * m);
    for j in n - m..n {
        let t = rng.random_range(0..=j);
        if seen.insert(t) {
            picked.push(t);
        } else {
            seen.insert(j);
            picked.push(j);
        }
    }
    Ok(picked)
}

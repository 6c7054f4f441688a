//! Deterministic random streams and replica ensembles.
//!
//! Replica `i` of an experiment seeded with `seed` always draws from the same ChaCha
//! stream, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// Independent stream `index` of the generator family keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `count` replicas in parallel, replica `i` on `stream(seed, i)`, and returns the
/// results in replica order.
pub fn replicas<T, F>(seed: u64, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Like [`replicas`] but each worker handles a contiguous batch, which avoids per-item
/// overhead for very cheap replicas. Replica `i` still uses `stream(seed, i)`.
pub fn replicas_batched<T, F>(seed: u64, count: usize, batch: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    let batch = batch.max(1);
    let chunks: Vec<Vec<T>> = (0..count.div_ceil(batch))
        .into_par_iter()
        .map(|c| {
            (c * batch..((c + 1) * batch).min(count))
                .map(|i| {
                    let mut rng = stream(seed, i as u64);
                    f(i, &mut rng)
                })
                .collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

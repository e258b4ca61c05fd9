//! Seeded random streams.
//!
//! Every random quantity in the crate comes from ChaCha8 seeded with a `u64`.
//! Work that is split into chunks (Monte Carlo draws, sampling batches) gives
//! chunk `c` the stream `(seed, c)`, so results do not depend on how many
//! threads execute the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of draws handled by one independent stream.
pub const CHUNK: usize = 1024;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The generator for chunk `index` of a computation seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Splits `total` draws into `(chunk index, draws in chunk)` pairs.
pub(crate) fn chunks(total: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(total - c * CHUNK)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunks_cover_total() {
        let c = chunks(2500);
        assert_eq!(c.len(), 3);
        assert_eq!(c.iter().map(|&(_, d)| d).sum::<usize>(), 2500);
        assert!(chunks(0).is_empty());
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream(7, 0).random();
        let b: u64 = stream(7, 1).random();
        let a2: u64 = stream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}

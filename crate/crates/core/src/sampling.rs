//! Deterministic chunked random streams.
//!
//! Sample `i` is drawn from the ChaCha stream of chunk `i / CHUNK`, so results do
//! not depend on how chunks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub const CHUNK: usize = 1024;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Maps `f` over `0..count`, handing each call the stream of its chunk.
pub fn chunked_map<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, usize) -> T + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let run = |c: usize| -> Vec<T> {
        let mut rng = stream(seed, c as u64);
        (c * CHUNK..((c + 1) * CHUNK).min(count)).map(|i| f(&mut rng, i)).collect()
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().flat_map_iter(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).flat_map(run).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunking_is_deterministic() {
        let a = chunked_map(3000, 7, |rng, i| (i, rng.gen::<u64>()));
        let b = chunked_map(3000, 7, |rng, i| (i, rng.gen::<u64>()));
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(k, (i, _))| k == *i));
        let c = chunked_map(3000, 8, |rng, _| rng.gen::<u64>());
        assert_ne!(a[0].1, c[0]);
    }
}

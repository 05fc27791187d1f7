//! Deterministic data-parallel execution.
//!
//! Trials are cut into fixed-size chunks and every chunk owns its own ChaCha
//! stream, selected by chunk index. Results are returned in chunk order, so a
//! run is bit-identical whether chunks execute on one thread or many.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Trials per chunk. Part of the reproducibility contract: changing it
/// changes every Monte-Carlo result.
pub const CHUNK_TRIALS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Rayon work-stealing over chunks. Falls back to sequential when the
    /// crate is built without the `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

impl std::str::FromStr for Execution {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "parallel" => Ok(Execution::Parallel),
            "sequential" => Ok(Execution::Sequential),
            other => Err(crate::Error::Range(format!("unknown execution mode `{other}` (parallel|sequential)"))),
        }
    }
}

impl std::fmt::Display for Execution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Execution::Parallel => "parallel",
            Execution::Sequential => "sequential",
        })
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seed plus a label naming one consumer of randomness. Distinct labels
/// give unrelated ChaCha keys; chunks within a label use distinct streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeed {
    pub seed: u64,
    pub label: u64,
}

impl StreamSeed {
    pub fn new(seed: u64, label: u64) -> Self {
        Self { seed, label }
    }

    /// Child seed for a sub-task (e.g. one block of an estimator).
    pub fn derive(self, sub: u64) -> Self {
        Self { seed: self.seed, label: mix64(self.label ^ mix64(sub.wrapping_add(0x5851_f42d_4c95_7f2d))) }
    }

    pub fn rng(self, chunk: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            mix64(self.seed),
            mix64(self.seed ^ 0xa076_1d64_78bd_642f),
            mix64(self.label),
            mix64(self.label ^ 0xe703_7ed1_a0b4_28db),
        ];
        for (dst, w) in key.chunks_exact_mut(8).zip(words) {
            dst.copy_from_slice(&w.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

/// Split `0..trials` into chunk ranges.
pub fn chunk_ranges(trials: usize) -> Vec<Range<usize>> {
    (0..trials.div_ceil(CHUNK_TRIALS)).map(|c| c * CHUNK_TRIALS..((c + 1) * CHUNK_TRIALS).min(trials)).collect()
}

/// Run `op` once per chunk with that chunk's RNG; results come back in chunk
/// order.
pub fn map_trial_chunks<T, F>(exec: Execution, stream: StreamSeed, trials: usize, op: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(trials);
    let run = |(c, r): (usize, Range<usize>)| {
        let mut rng = stream.rng(c as u64);
        op(&mut rng, r)
    };
    map_ordered(exec, ranges.into_iter().enumerate().collect(), run)
}

/// Order-preserving map over owned items.
pub fn map_ordered<I, T, F>(exec: Execution, items: Vec<I>, op: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.into_par_iter().map(op).collect();
    }
    let _ = exec;
    items.into_iter().map(op).collect()
}

/// Pairwise (tree) reduction in fixed order.
pub fn tree_reduce<T: Clone>(mut items: Vec<T>, merge: impl Fn(&T, &T) -> T) -> Option<T> {
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        items = items.chunks(2).map(|p| if p.len() == 2 { merge(&p[0], &p[1]) } else { p[0].clone() }).collect();
    }
    items.pop()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn chunks_cover_trials() {
        let r = chunk_ranges(2500);
        assert_eq!(r.len(), 3);
        assert_eq!(r[2], 2048..2500);
        assert!(chunk_ranges(0).is_empty());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let s = StreamSeed::new(7, 3);
        let f = |rng: &mut ChaCha8Rng, r: Range<usize>| r.map(|_| rng.next_u64() >> 40).sum::<u64>();
        let a = map_trial_chunks(Execution::Parallel, s, 10_000, f);
        let b = map_trial_chunks(Execution::Sequential, s, 10_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn labels_and_chunks_decorrelate() {
        let a = StreamSeed::new(1, 0).rng(0).next_u64();
        let b = StreamSeed::new(1, 1).rng(0).next_u64();
        let c = StreamSeed::new(1, 0).rng(1).next_u64();
        let d = StreamSeed::new(2, 0).rng(0).next_u64();
        assert!(a != b && a != c && a != d && b != c);
    }

    #[test]
    fn tree_reduce_sums() {
        let v: Vec<u32> = (1..=9).collect();
        assert_eq!(tree_reduce(v, |a, b| a + b), Some(45));
    }
}

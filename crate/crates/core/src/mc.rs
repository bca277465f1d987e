//! Deterministic chunked Monte Carlo execution.
//!
//! Samples are split into fixed-size chunks; each chunk owns an RNG
//! substream derived only from (seed, chunk index). Chunk results are
//! merged in chunk order, so the outcome is bit-identical for any worker
//! count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples per chunk. Fixed so that chunk boundaries (and hence RNG
/// substreams) never depend on the worker count.
pub const CHUNK_SIZE: usize = 1 << 15;

/// Worker count resolution: explicit value, else `SUCS_WORKERS`, else all
/// available cores.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    if let Some(w) = requested {
        if w > 0 {
            return w;
        }
    }
    if let Ok(env) = std::env::var("SUCS_WORKERS") {
        if let Ok(w) = env.trim().parse::<usize>() {
            if w > 0 {
                return w;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
}

/// RNG substream for one chunk, independent of every other chunk.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&chunk.to_le_bytes());
    key[16..24].copy_from_slice(b"sucs-mc-");
    key[24..32].copy_from_slice(b"substrm1");
    ChaCha8Rng::from_seed(key)
}

/// Run `total` samples split into fixed chunks, in parallel over `workers`
/// threads, returning per-chunk results in chunk order.
///
/// `per_chunk(chunk_index, chunk_len, rng)` must derive all randomness from
/// the supplied RNG.
pub fn run_chunks<T, F>(total: usize, seed: u64, workers: usize, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, &mut ChaCha8Rng) -> T + Sync,
{
    let n_chunks = total.div_ceil(CHUNK_SIZE);
    let sizes: Vec<usize> = (0..n_chunks)
        .map(|c| {
            if c + 1 == n_chunks {
                total - c * CHUNK_SIZE
            } else {
                CHUNK_SIZE
            }
        })
        .collect();

    let job = |c: usize| {
        let mut rng = chunk_rng(seed, c as u64);
        per_chunk(c, sizes[c], &mut rng)
    };

    if workers <= 1 || n_chunks <= 1 {
        (0..n_chunks).map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.min(n_chunks))
            .build()
            .expect("thread pool construction");
        pool.install(|| {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().map(job).collect()
        })
    }
}

/// Streaming mean/variance accumulator for one scalar estimator component.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Merge must be applied in a fixed order to stay deterministic.
    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

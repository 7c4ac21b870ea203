//! Seeded Monte Carlo means with a deterministic parallel reduction.
//!
//! Samples are drawn in fixed-size chunks. Chunk `i` uses its own ChaCha8
//! stream (seed, stream `i`), each chunk keeps Welford accumulators, and the
//! chunk partials are merged in chunk order. The result therefore depends only
//! on `(sampler, n, seed)` and not on the rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Estimate;
use crate::error::{invalid, Error, Result};

/// Samples per chunk; fixed so that chunk boundaries never depend on threads.
pub const CHUNK_SIZE: u64 = 4096;

/// The random stream for chunk `chunk` of a run seeded with `seed`.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    fn estimate(&self, seed: u64) -> Estimate {
        let n = self.count as f64;
        let var = (self.m2 / (n - 1.0)).max(0.0);
        Estimate {
            value: self.mean,
            error: (var / n).sqrt(),
            n: self.count,
            seed: Some(seed),
        }
    }
}

/// Monte Carlo means of `k` jointly sampled statistics.
///
/// `sampler` fills one draw of all `k` statistics from the supplied stream, so
/// statistics computed from the same draw share common random numbers.
/// A non-finite statistic aborts the run with [`Error::Overflow`].
pub fn mc_means<F>(n: u64, seed: u64, k: usize, sampler: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 samples, got {n}")));
    }
    if k == 0 {
        return Err(invalid("k", "need at least one statistic"));
    }
    let chunks = n.div_ceil(CHUNK_SIZE);
    let partials: Vec<Result<Vec<Welford>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = substream(seed, chunk);
            let start = chunk * CHUNK_SIZE;
            let len = CHUNK_SIZE.min(n - start);
            let mut acc = vec![Welford::default(); k];
            let mut draw = vec![0.0; k];
            for i in 0..len {
                sampler(&mut rng, &mut draw);
                for (a, &x) in acc.iter_mut().zip(&draw) {
                    if !x.is_finite() {
                        return Err(Error::Overflow {
                            context: "mc_mean",
                            samples: start + i + 1,
                        });
                    }
                    a.push(x);
                }
            }
            Ok(acc)
        })
        .collect();

    let mut total = vec![Welford::default(); k];
    for part in partials {
        for (t, p) in total.iter_mut().zip(&part?) {
            t.merge(p);
        }
    }
    Ok(total.iter().map(|w| w.estimate(seed)).collect())
}

/// Monte Carlo mean of a scalar statistic; see [`mc_means`].
pub fn mc_mean<F>(n: u64, seed: u64, sampler: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let mut out = mc_means(n, seed, 1, |rng, buf| buf[0] = sampler(rng))?;
    Ok(out.remove(0))
}

//! Record counts of i.i.d. continuous sequences.
//!
//! Trial `k` sets a record with probability `1/k`, independently of the other
//! trials, so the number of records in `n` trials has mean `H_n` (the
//! harmonic number) and variance `sum_k (1/k)(1 - 1/k)`.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::rng::stream_rng;

/// Above this `n` the harmonic sums switch to their asymptotic expansions.
pub const DIRECT_SUM_LIMIT: u64 = 1_000_000;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordCountStats {
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
}

impl RecordCountStats {
    /// `(count - ln n) / sqrt(ln n)`; undefined for `n = 1`.
    pub fn z_normalized(&self, count: u64) -> Option<f64> {
        let l = ln(self.n as f64);
        (l > 0.0).then(|| (count as f64 - l) / sqrt(l))
    }
}

/// `(H_n, sum 1/k^2)` for `n >= 1`.
fn harmonic_sums(n: u64) -> (f64, f64) {
    if n <= DIRECT_SUM_LIMIT {
        let mut h1 = 0.0;
        let mut h2 = 0.0;
        for k in 1..=n {
            let inv = 1.0 / k as f64;
            h1 += inv;
            h2 += inv * inv;
        }
        (h1, h2)
    } else {
        let x = n as f64;
        let h1 = ln(x) + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x);
        let zeta2 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        let h2 = zeta2 - 1.0 / x + 1.0 / (2.0 * x * x) - 1.0 / (6.0 * x * x * x);
        (h1, h2)
    }
}

/// Harmonic number `H_n = 1 + 1/2 + ... + 1/n`.
pub fn harmonic(n: u64) -> f64 {
    harmonic_sums(n).0
}

pub fn expected_records(n: u64) -> Result<RecordCountStats> {
    if n == 0 {
        return Err(Error::Argument("record counts need at least one trial"));
    }
    let (h1, h2) = harmonic_sums(n);
    Ok(RecordCountStats {
        n,
        mean: h1,
        variance: h1 - h2,
    })
}

/// Number of strict running maxima in `values`; ties are not records.
pub fn count_records(values: &[f64]) -> u32 {
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for &v in values {
        if v > best {
            best = v;
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordSimulation {
    pub n: u64,
    /// Record count of each replicate sequence.
    pub counts: Vec<u32>,
}

impl RecordSimulation {
    pub fn replicates(&self) -> usize {
        self.counts.len()
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// Unbiased sample variance (0 for a single replicate).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let r = self.counts.len();
        if r < 2 {
            return 0.0;
        }
        self.counts
            .iter()
            .map(|&c| (c as f64 - m) * (c as f64 - m))
            .sum::<f64>()
            / (r - 1) as f64
    }

    /// Monte Carlo standard error of [`mean`](Self::mean).
    pub fn mean_se(&self) -> f64 {
        sqrt(self.variance() / self.counts.len() as f64)
    }

    /// Sample skewness of the counts (and so of any affine standardization).
    pub fn skewness(&self) -> f64 {
        let m = self.mean();
        let r = self.counts.len() as f64;
        let (m2, m3) = self.counts.iter().fold((0.0, 0.0), |(s2, s3), &c| {
            let d = c as f64 - m;
            (s2 + d * d, s3 + d * d * d)
        });
        let (m2, m3) = (m2 / r, m3 / r);
        if m2 == 0.0 {
            0.0
        } else {
            m3 / (m2 * sqrt(m2))
        }
    }

    /// `(count, frequency)` pairs in increasing count order.
    pub fn distribution(&self) -> Vec<(u32, usize)> {
        let mut sorted = self.counts.clone();
        sorted.sort_unstable();
        let mut out: Vec<(u32, usize)> = Vec::new();
        for c in sorted {
            match out.last_mut() {
                Some((v, f)) if *v == c => *f += 1,
                _ => out.push((c, 1)),
            }
        }
        out
    }
}

/// Record counts of `replicates` sequences of `n` uniform draws.
pub fn simulate_record_counts(n: u64, replicates: usize, seed: u64) -> Result<RecordSimulation> {
    simulate_record_counts_with(n, replicates, seed, |rng| rng.random::<f64>())
}

/// Record counts with draws from `draw`; replicate `r` uses stream `r` of `seed`.
pub fn simulate_record_counts_with<F>(
    n: u64,
    replicates: usize,
    seed: u64,
    mut draw: F,
) -> Result<RecordSimulation>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    if n == 0 || replicates == 0 {
        return Err(Error::Argument("need at least one trial and one replicate"));
    }
    let counts = (0..replicates)
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut best = f64::NEG_INFINITY;
            let mut count = 0u32;
            for _ in 0..n {
                let v = draw(&mut rng);
                if v > best {
                    best = v;
                    count += 1;
                }
            }
            count
        })
        .collect();
    Ok(RecordSimulation { n, counts })
}

//! Seeded, batch-parallel Monte Carlo.
//!
//! Every draw `i` gets its own ChaCha stream `(seed, i)`, so the value of a
//! draw never depends on which worker produced it. Draws are summed in
//! fixed-size chunks and chunks are reduced in index order, which makes
//! every estimate bit-identical across thread counts.

pub mod estimators;
pub mod suite;

pub use estimators::{simulate_estimator, Estimator, EstimatorSpec, Simulation};
pub use suite::{run_verification_suite, CheckResult, CheckStatus, Scope, VerificationReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::symspace::{sym_dim, DenseOperator};

pub type McRng = ChaCha8Rng;

const CHUNK: usize = 1024;

/// Independent random stream for draw number `index`.
pub fn substream(seed: u64, index: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub samples: usize,
    pub batches: usize,
}

impl McConfig {
    pub fn new(seed: u64, samples: usize, batches: usize) -> Result<Self> {
        if batches < 2 {
            return Err(Error::Invalid("batches must be at least 2".into()));
        }
        if samples == 0 || samples % batches != 0 {
            return Err(Error::Invalid(format!(
                "samples ({samples}) must be a positive multiple of batches ({batches})"
            )));
        }
        Ok(Self {
            seed,
            samples,
            batches,
        })
    }

    pub fn per_batch(&self) -> usize {
        self.samples / self.batches
    }

    /// Same seed, different sample count (batches kept).
    pub fn with_samples(&self, samples: usize) -> Result<Self> {
        Self::new(self.seed, samples, self.batches)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Batch-mean estimate of a vector-valued expectation.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub batch_means: Vec<Vec<f64>>,
}

impl McEstimate {
    fn from_batches(batch_means: Vec<Vec<f64>>) -> Self {
        let b = batch_means.len() as f64;
        let dim = batch_means[0].len();
        let mut mean = vec![0.0; dim];
        for bm in &batch_means {
            for (m, x) in mean.iter_mut().zip(bm) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= b);
        let mut var = vec![0.0; dim];
        for bm in &batch_means {
            for k in 0..dim {
                let d = bm[k] - mean[k];
                var[k] += d * d;
            }
        }
        let std_err = var.iter().map(|v| (v / (b - 1.0) / b).sqrt()).collect();
        Self {
            mean,
            std_err,
            batch_means,
        }
    }

    /// Largest `|mean - expected| / se` over all entries.
    pub fn max_z(&self, expected: &[f64]) -> f64 {
        max_z(&self.mean, &self.std_err, expected)
    }
}

/// Largest standardised deviation. Entries with zero standard error count
/// as exact only if they agree to rounding.
pub fn max_z(mean: &[f64], se: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(mean.len(), expected.len());
    mean.iter()
        .zip(se)
        .zip(expected)
        .map(|((&m, &s), &e)| {
            let d = (m - e).abs();
            if s > 0.0 {
                d / s
            } else if d <= 1e-12 * e.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Estimates `E[f]` where `f` writes a `dim`-vector for one draw.
pub fn mc_expectation<F>(config: &McConfig, dim: usize, f: F) -> McEstimate
where
    F: Fn(&mut McRng, &mut [f64]) + Sync,
{
    let per_batch = config.per_batch();
    let chunks_per_batch = per_batch.div_ceil(CHUNK);
    let tasks: Vec<(usize, usize)> = (0..config.batches)
        .flat_map(|b| (0..chunks_per_batch).map(move |c| (b, c)))
        .collect();
    let sums: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(b, c)| {
            let start = b * per_batch + c * CHUNK;
            let end = (b * per_batch + per_batch).min(start + CHUNK);
            let mut acc = vec![0.0; dim];
            let mut buf = vec![0.0; dim];
            for i in start..end {
                buf.iter_mut().for_each(|x| *x = 0.0);
                let mut rng = substream(config.seed, i as u64);
                f(&mut rng, &mut buf);
                for (a, x) in acc.iter_mut().zip(&buf) {
                    *a += x;
                }
            }
            acc
        })
        .collect();
    let batch_means = sums
        .chunks(chunks_per_batch)
        .map(|chunk| {
            let mut total = vec![0.0; dim];
            for s in chunk {
                for (t, x) in total.iter_mut().zip(s) {
                    *t += x;
                }
            }
            total.iter_mut().for_each(|t| *t /= per_batch as f64);
            total
        })
        .collect();
    McEstimate::from_batches(batch_means)
}

/// Batch-mean estimate of an operator-valued expectation.
#[derive(Debug, Clone)]
pub struct OperatorEstimate {
    pub mean: DenseOperator<f64>,
    pub std_err: DenseOperator<f64>,
    pub batch_means: Vec<DenseOperator<f64>>,
}

impl OperatorEstimate {
    fn from_estimate(n: usize, est: McEstimate) -> Self {
        let m = sym_dim(n);
        let op = |v: Vec<f64>| {
            DenseOperator::new(n, SquareMatrix::from_row_major(m, v).expect("m*m entries"))
                .expect("sized by sym_dim")
        };
        Self {
            mean: op(est.mean),
            std_err: op(est.std_err),
            batch_means: est.batch_means.into_iter().map(op).collect(),
        }
    }

    pub fn max_z(&self, expected: &DenseOperator<f64>) -> f64 {
        max_z(
            self.mean.matrix().as_slice(),
            self.std_err.matrix().as_slice(),
            expected.matrix().as_slice(),
        )
    }

    /// Minimum eigenvalue of `mean - bound` with its batch standard error
    /// (spread of the per-batch minimum eigenvalues).
    pub fn loewner_gap(&self, bound: &DenseOperator<f64>) -> Result<(f64, f64)> {
        let gap = self.mean.sub(bound)?.min_eigenvalue();
        let per_batch: Vec<f64> = self
            .batch_means
            .iter()
            .map(|bm| bm.sub(bound).map(|d| d.min_eigenvalue()))
            .collect::<Result<_>>()?;
        Ok((gap, spread_se(&per_batch)))
    }
}

/// Standard error of the mean of `xs`.
pub fn spread_se(xs: &[f64]) -> f64 {
    let b = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / b;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Estimates `E[map(sampler())]` for an operator on symmetric matrices of order `n`.
pub fn mc_operator_expectation<S, D, M>(config: &McConfig, n: usize, sampler: D, map: M) -> OperatorEstimate
where
    D: Fn(&mut McRng) -> S + Sync,
    M: Fn(&S) -> DenseOperator<f64> + Sync,
{
    let m = sym_dim(n);
    let est = mc_expectation(config, m * m, |rng, out| {
        let s = sampler(rng);
        out.copy_from_slice(map(&s).matrix().as_slice());
    });
    OperatorEstimate::from_estimate(n, est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn config_validation() {
        assert!(McConfig::new(1, 100, 1).is_err());
        assert!(McConfig::new(1, 101, 10).is_err());
        assert!(McConfig::new(1, 0, 10).is_err());
        assert_eq!(McConfig::new(1, 100, 10).unwrap().per_batch(), 10);
    }

    #[test]
    fn constant_map_has_zero_error() {
        let cfg = McConfig::new(3, 5000, 10).unwrap();
        let est = mc_operator_expectation(&cfg, 2, |_rng| (), |_| DenseOperator::identity(2));
        assert_eq!(est.mean, DenseOperator::identity(2));
        assert!(est.std_err.matrix().as_slice().iter().all(|&s| s == 0.0));
        assert_eq!(est.max_z(&DenseOperator::identity(2)), 0.0);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: u64 = substream(9, 4).random();
        let b: u64 = substream(9, 4).random();
        let c: u64 = substream(9, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_mean_and_error_scaling() {
        let big = McConfig::new(11, 200_000, 10).unwrap();
        let small = big.with_samples(100_000).unwrap();
        let f = |rng: &mut McRng, out: &mut [f64]| out[0] = rng.random::<f64>();
        let e1 = mc_expectation(&big, 1, f);
        let e2 = mc_expectation(&small, 1, f);
        assert!(e1.max_z(&[0.5]) < 4.0);
        let ratio = e2.std_err[0] / e1.std_err[0];
        assert!(ratio > 2f64.sqrt() / 2.0 && ratio < 2.0 * 2f64.sqrt(), "ratio {ratio}");
    }

    #[test]
    fn result_independent_of_thread_count() {
        let cfg = McConfig::new(5, 30_000, 10).unwrap();
        let f = |rng: &mut McRng, out: &mut [f64]| {
            let x: f64 = rng.random();
            out[0] = x;
            out[1] = x * x;
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| mc_expectation(&cfg, 2, f));
        let b = four.install(|| mc_expectation(&cfg, 2, f));
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_err, b.std_err);
    }
}

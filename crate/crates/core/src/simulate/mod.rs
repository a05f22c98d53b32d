//! Monte Carlo machinery shared by the SPDE and Feynman-Kac engines.
//!
//! Path `i` draws from its own ChaCha8 stream `(seed, i)`, and per-path
//! values are reduced in path order by a fixed pairwise tree, so results do
//! not depend on how paths were spread over workers.

mod config;
mod fk;
mod spde;

pub use config::{Engine, FkConfig, RunConfig, SpdeConfig, Target};
pub use fk::{fk_two_point, fk_two_point_occupation, InitialFunction};
pub use spde::{spde_estimate_two_point, spde_solve_path, Boundary, Rho, SpdeGrid};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of divergent paths above which an estimate is rejected.
pub const MAX_DIVERGENT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_batch() -> usize {
    256
}

fn default_workers() -> usize {
    1
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            seed,
            batch_size: default_batch(),
            workers: default_workers(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }
}

/// Generator for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean and `sample_std / sqrt(n)`, both with pairwise sums.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { value: f64::NAN, std_error: f64::NAN, n: 0 };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Estimate { value: mean, std_error: 0.0, n };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        Estimate {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `(value - reference) / std_error`; infinite when the error is zero
    /// and the values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.value - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Sum with a fixed binary tree (leaves of 8 summed left to right).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Result of one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathValue {
    Value(f64),
    /// The path produced a non-finite value at this step.
    Diverged(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub estimate: Estimate,
    pub divergent_paths: usize,
}

/// Evaluates `path(i, rng_i)` for every path on a pool of `mc.workers`
/// threads and returns the values in path order.
pub fn run_paths<F>(mc: &McConfig, path: F) -> Result<Vec<PathValue>>
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<PathValue> + Sync,
{
    mc.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(mc.workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let mut out = vec![PathValue::Value(0.0); mc.n_paths];
    let batch = mc.batch_size;
    pool.install(|| {
        out.par_chunks_mut(batch).enumerate().try_for_each(|(chunk, slots)| {
            for (k, slot) in slots.iter_mut().enumerate() {
                let index = (chunk * batch + k) as u64;
                let mut rng = path_rng(mc.seed, index);
                *slot = path(index, &mut rng)?;
            }
            Ok::<(), Error>(())
        })
    })?;
    Ok(out)
}

/// Reduces path values to an estimate, rejecting it when more than
/// [`MAX_DIVERGENT_FRACTION`] of the paths diverged.
pub fn summarize(values: &[PathValue]) -> Result<SimOutcome> {
    let total = values.len();
    let mut finite = Vec::with_capacity(total);
    let mut divergent = 0usize;
    let mut first_step = usize::MAX;
    for v in values {
        match *v {
            PathValue::Value(x) if x.is_finite() => finite.push(x),
            PathValue::Value(_) => {
                divergent += 1;
                first_step = 0;
            }
            PathValue::Diverged(step) => {
                divergent += 1;
                first_step = first_step.min(step);
            }
        }
    }
    if divergent as f64 > MAX_DIVERGENT_FRACTION * total as f64 || finite.is_empty() {
        return Err(Error::Divergence {
            divergent,
            total,
            first_step,
        });
    }
    Ok(SimOutcome {
        estimate: Estimate::from_samples(&finite),
        divergent_paths: divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = Estimate::from_samples(&[2.5; 100]);
        assert_eq!(e, Estimate { value: 2.5, std_error: 0.0, n: 100 });
        assert_eq!(e.z_score(2.5), 0.0);
    }

    #[test]
    fn estimate_matches_textbook_formula() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let e = Estimate::from_samples(&xs);
        assert_eq!(e.value, 3.5);
        let var: f64 = xs.iter().map(|x| (x - 3.5) * (x - 3.5)).sum::<f64>() / 3.0;
        assert!((e.std_error - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a: f64 = path_rng(1, 0).random();
        let b: f64 = path_rng(1, 1).random();
        let c: f64 = path_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn results_do_not_depend_on_workers_or_batches() {
        let path = |_: u64, rng: &mut ChaCha8Rng| Ok(PathValue::Value(rng.random::<f64>()));
        let base = run_paths(&McConfig::new(1000, 9), path).unwrap();
        for (w, b) in [(4, 7), (3, 1000), (2, 1)] {
            let mc = McConfig::new(1000, 9).with_workers(w).with_batch_size(b);
            assert_eq!(run_paths(&mc, path).unwrap(), base);
        }
    }

    #[test]
    fn divergence_threshold() {
        let mut v = vec![PathValue::Value(1.0); 2000];
        v[5] = PathValue::Diverged(17);
        v[6] = PathValue::Diverged(3);
        let out = summarize(&v).unwrap();
        assert_eq!(out.divergent_paths, 2);
        assert_eq!(out.estimate.n, 1998);
        v[7] = PathValue::Value(f64::INFINITY);
        match summarize(&v) {
            Err(Error::Divergence { divergent: 3, total: 2000, first_step: 0 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(McConfig::new(0, 1).validate().is_err());
        assert!(McConfig::new(1, 1).with_workers(0).validate().is_err());
        assert!(McConfig::new(1, 1).with_batch_size(0).validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn pairwise_sum_tracks_naive_sum(xs in proptest::collection::vec(-1e3f64..1e3, 0..500)) {
            let naive: f64 = xs.iter().sum();
            let abs: f64 = xs.iter().map(|x| x.abs()).sum();
            proptest::prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * abs.max(1.0));
        }
    }
}

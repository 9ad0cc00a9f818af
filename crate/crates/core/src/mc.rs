//! Trial streams, compensated summation and the schedule-independent trial
//! runner shared by every Monte-Carlo estimator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TRIALS: usize = 2000;
pub const DEFAULT_SEED: u64 = 42;

/// Random stream for one trial. Trial `i` of master seed `s` always sees the
/// same numbers, independent of how trials are scheduled.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Neumaier-compensated running sum. Terms are added in the order given.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Monte-Carlo estimate over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
    /// Fraction of evaluated orbits whose eccentricity had to be clamped.
    pub clamped_fraction: f64,
}

impl McResult {
    /// Mean and standard error of the mean of per-trial values.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            trials: n,
            seed,
            clamped_fraction: 0.0,
        }
    }
}

/// Trial count, master seed and worker count for an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            threads: None,
        }
    }
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        Self {
            threads: Some(threads),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Evaluates `trial(index, rng)` for every trial and returns the outputs in
    /// trial order. Output is identical for any thread count.
    pub fn run<T, F>(&self, trial: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
    {
        self.validate()?;
        let seed = self.seed;
        let work = || {
            (0..self.trials as u64)
                .into_par_iter()
                .map(|i| trial(i, &mut trial_rng(seed, i)))
                .collect::<Result<Vec<T>>>()
        };
        match self.threads {
            None => work(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?
                .install(work),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_of_order() {
        let a: f64 = trial_rng(7, 3).gen();
        let _ = trial_rng(7, 2).gen::<f64>();
        let b: f64 = trial_rng(7, 3).gen();
        assert_eq!(a, b);
        assert_ne!(a, trial_rng(7, 4).gen::<f64>());
        assert_ne!(a, trial_rng(8, 3).gen::<f64>());
    }

    #[test]
    fn compensation_recovers_lost_bits() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn sample_statistics() {
        let r = McResult::from_samples(&[1.0, 2.0, 3.0, 4.0], 9);
        assert_eq!(r.mean, 2.5);
        assert!((r.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!((r.trials, r.seed), (4, 9));
        assert_eq!(McResult::from_samples(&[3.0], 0).std_error, 0.0);
    }

    #[test]
    fn runner_is_schedule_independent() {
        let f = |_i: u64, rng: &mut ChaCha8Rng| Ok((0..10).map(|_| rng.gen::<f64>()).sum::<f64>());
        let one = McConfig::new(64, 3).with_threads(1).run(f).unwrap();
        let many = McConfig::new(64, 3).with_threads(8).run(f).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn zero_trials_rejected() {
        let f = |_i: u64, _rng: &mut ChaCha8Rng| Ok(0.0);
        assert!(McConfig::new(0, 1).run(f).is_err());
        assert!(McConfig::new(4, 1).with_threads(0).run(f).is_err());
    }
}

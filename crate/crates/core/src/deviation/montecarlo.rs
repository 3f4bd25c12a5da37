use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{CovarianceModel, FbmSampler, HurstParam};
use crate::grid::TimeGrid;

/// Two-sided 99% normal quantile.
pub const WILSON_Z99: f64 = 2.575_829_303_548_900_4;

/// Monte Carlo probability estimate with a 99% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    /// Success fraction, or `3 / trials` when nothing was observed.
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub trials: u64,
    pub seed: u64,
    pub zero_count_flag: bool,
}

impl MCEstimate {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = WILSON_Z99 * WILSON_Z99;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = WILSON_Z99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        let zero = successes == 0;
        let estimate = if zero { 3.0 / n } else { p };
        MCEstimate {
            estimate,
            ci_low: (centre - half).max(0.0).min(estimate),
            ci_high: (centre + half).min(1.0).max(estimate),
            successes,
            trials,
            seed,
            zero_count_flag: zero,
        }
    }

    /// Natural log of the estimate.
    pub fn log_estimate(&self) -> f64 {
        self.estimate.ln()
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Counts trials `0..trials` for which `hit` returns true. Each trial has its
/// own random stream, so the count does not depend on scheduling.
fn count_hits<F>(trials: u64, seed: u64, hit: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .filter(|&k| hit(&mut trial_rng(seed, k)))
            .count() as u64
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).filter(|&k| hit(&mut trial_rng(seed, k))).count() as u64
    }
}

/// Estimates `P(sum_i X_i^2 <= x)` for `X ~ N(0, cov)`.
pub fn mc_gaussian_quadratic(cov: &DMatrix<f64>, x: f64, trials: u64, seed: u64) -> Result<MCEstimate> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let n = cov.nrows();
    let l = nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::domain("covariance is not positive definite"))?
        .unpack();
    let hits = count_hits(trials, seed, |rng| {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut q = 0.0;
        for i in 0..n {
            let mut xi = 0.0;
            for j in 0..=i {
                xi += l[(i, j)] * z[j];
            }
            q += xi * xi;
        }
        q <= x
    });
    Ok(MCEstimate::from_counts(hits, trials, seed))
}

/// Estimates `P(sum_{k<n} (B_{k+1} - B_k)^2 <= alpha n)` for fBm, sampling
/// on `{0, 1/n, ..., 1}` and rescaling by self-similarity.
pub fn mc_small_deviation(n: usize, hurst: HurstParam, alpha: f64, trials: u64, seed: u64) -> Result<MCEstimate> {
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) && alpha != 1.0 {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let grid = TimeGrid::uniform(n, 0.0, 1.0)?;
    let sampler = FbmSampler::new(hurst, &grid, CovarianceModel::default())?;
    let scale = (n as f64).powf(2.0 * hurst.value());
    let threshold = alpha * n as f64;
    let hits = count_hits(trials, seed, |rng| {
        let inc = sampler.sample_increments(rng);
        let q: f64 = inc.iter().map(|d| d * d).sum::<f64>() * scale;
        q <= threshold
    });
    Ok(MCEstimate::from_counts(hits, trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_contains_estimate() {
        for (s, t) in [(0u64, 1000u64), (1, 1000), (500, 1000), (1000, 1000)] {
            let e = MCEstimate::from_counts(s, t, 0);
            assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high, "{e:?}");
        }
        let zero = MCEstimate::from_counts(0, 100_000, 0);
        assert!(zero.zero_count_flag);
        assert!((zero.estimate - 3e-5).abs() < 1e-20);
    }

    #[test]
    fn single_increment_matches_normal_cdf() {
        // P(Z^2 <= 1) = erf(1/sqrt 2)
        let e = mc_small_deviation(1, HurstParam::new(0.7).unwrap(), 1.0, 20_000, 9).unwrap();
        let exact = 0.682_689_492_137_085_9;
        assert!(e.ci_low <= exact && exact <= e.ci_high, "{e:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let h = HurstParam::new(0.6).unwrap();
        let a = mc_small_deviation(4, h, 0.5, 2000, 4).unwrap();
        let b = mc_small_deviation(4, h, 0.5, 2000, 4).unwrap();
        assert_eq!(a, b);
    }
}

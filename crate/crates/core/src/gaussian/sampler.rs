use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::deviation::autocovariance_rho;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

use super::covariance::increment_covariance_points;
use super::{HurstParam, SamplePath};

/// Above this many increments a uniform grid is sampled by the streaming
/// Durbin-Levinson recursion instead of a stored dense factor.
const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssemblyMode {
    /// Covariance of the path values `R_H(t_i, t_j)`.
    Pointwise,
    /// Covariance of consecutive increments, assembled from lags.
    IncrementBased,
}

/// How the Gaussian vector is assembled and repaired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub assembly: AssemblyMode,
    /// Eigenvalues of the correlation matrix below `threshold * max_eigenvalue`
    /// abort sampling; negative ones above it are clipped to zero.
    pub clip_threshold: f64,
}

impl Default for CovarianceModel {
    fn default() -> Self {
        CovarianceModel {
            assembly: AssemblyMode::IncrementBased,
            clip_threshold: -1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipEvent {
    pub index: usize,
    pub relative_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    Cholesky,
    EigenClipped,
    Levinson,
}

#[derive(Debug, Clone)]
enum Factor {
    /// `x = scale .* (L z)`; `lower` marks a triangular `L`.
    Dense {
        scale: Vec<f64>,
        l: DMatrix<f64>,
        lower: bool,
    },
    /// Unit-lag fractional Gaussian noise scaled by `step^H`.
    Levinson { acov: Vec<f64>, scale: f64 },
}

/// Exact Gaussian sampler for fBm on a fixed grid.
///
/// The factorization is done once; each call to [`FbmSampler::sample`] draws
/// one path. Sampling is deterministic given the seed.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: HurstParam,
    grid: TimeGrid,
    model: CovarianceModel,
    method: SamplerMethod,
    factor: Factor,
    clip_events: Vec<ClipEvent>,
}

impl FbmSampler {
    pub fn new(hurst: HurstParam, grid: &TimeGrid, model: CovarianceModel) -> Result<Self> {
        if grid.first().t != 0.0 {
            return Err(Error::domain("sampling grid must start at t = 0"));
        }
        if grid.len() < 2 {
            return Err(Error::domain("sampling grid needs at least two points"));
        }
        let m = grid.len() - 1;
        let p = hurst.two_h();
        let pts = grid.points();

        if model.assembly == AssemblyMode::IncrementBased && m > DENSE_LIMIT && grid.is_uniform(1e-9) {
            let h = pts[0].lag_to(&pts[1]);
            let acov = (0..m).map(|k| autocovariance_rho(k as u64, hurst)).collect();
            return Ok(FbmSampler {
                hurst,
                grid: grid.clone(),
                model,
                method: SamplerMethod::Levinson,
                factor: Factor::Levinson {
                    acov,
                    scale: h.powf(hurst.value()),
                },
                clip_events: Vec::new(),
            });
        }

        let cov = match model.assembly {
            AssemblyMode::IncrementBased => DMatrix::from_fn(m, m, |i, j| {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                increment_covariance_points(&pts[i], &pts[i + 1], &pts[j], &pts[j + 1], p)
            }),
            AssemblyMode::Pointwise => DMatrix::from_fn(m, m, |i, j| {
                let (s, t) = (pts[i + 1].t, pts[j + 1].t);
                let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
                0.5 * (lo.powf(p) + hi.powf(p) - (hi - lo).powf(p))
            }),
        };
        let (scale, l, lower, method, clip_events) = factorize(cov, model.clip_threshold)?;
        Ok(FbmSampler {
            hurst,
            grid: grid.clone(),
            model,
            method,
            factor: Factor::Dense { scale, l, lower },
            clip_events,
        })
    }

    pub fn method(&self) -> SamplerMethod {
        self.method
    }

    pub fn clip_events(&self) -> &[ClipEvent] {
        &self.clip_events
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// Draws the path values (starting at 0) from `rng`.
    pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.grid.len() - 1;
        match &self.factor {
            Factor::Dense { scale, l, lower } => {
                let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = if *lower {
                    lower_mul(l, &z)
                } else {
                    l * &z
                };
                let mut values = Vec::with_capacity(m + 1);
                values.push(0.0);
                match self.model.assembly {
                    AssemblyMode::IncrementBased => {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += scale[i] * x[i];
                            values.push(acc);
                        }
                    }
                    AssemblyMode::Pointwise => {
                        values.extend((0..m).map(|i| scale[i] * x[i]));
                    }
                }
                values
            }
            Factor::Levinson { acov, scale } => {
                let noise = levinson_noise(acov, rng);
                let mut values = Vec::with_capacity(m + 1);
                values.push(0.0);
                let mut acc = 0.0;
                for x in noise {
                    acc += scale * x;
                    values.push(acc);
                }
                values
            }
        }
    }

    /// One path from a seed.
    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = self.sample_values(&mut rng);
        SamplePath::from_parts(self.grid.clone(), values, self.hurst, seed, self.clip_events.clone())
    }

    /// Increments of one draw, `B(t_{i+1}) - B(t_i)`.
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let v = self.sample_values(rng);
        v.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `sample_fbm`: draws a path of fBm on `grid` from `seed`.
pub fn sample_fbm(hurst: HurstParam, grid: &TimeGrid, seed: u64, model: CovarianceModel) -> Result<SamplePath> {
    Ok(FbmSampler::new(hurst, grid, model)?.sample(seed))
}

type Factorization = (Vec<f64>, DMatrix<f64>, bool, SamplerMethod, Vec<ClipEvent>);

fn factorize(mut cov: DMatrix<f64>, threshold: f64) -> Result<Factorization> {
    let m = cov.nrows();
    let scale: Vec<f64> = (0..m).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::resolution("covariance has a non-positive or non-finite diagonal"));
    }
    for j in 0..m {
        for i in 0..m {
            cov[(i, j)] /= scale[i] * scale[j];
        }
    }
    if let Some(ch) = nalgebra::Cholesky::new(cov.clone()) {
        return Ok((scale, ch.unpack(), true, SamplerMethod::Cholesky, Vec::new()));
    }
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut events = Vec::new();
    let mut sqrt_vals = Vec::with_capacity(m);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let rel = lam / max;
        if rel < threshold {
            return Err(Error::PsdRepair {
                eigenvalue: rel,
                threshold,
            });
        }
        if lam < 0.0 {
            events.push(ClipEvent {
                index: k,
                relative_eigenvalue: rel,
            });
        }
        sqrt_vals.push(lam.max(0.0).sqrt());
    }
    let mut l = eig.eigenvectors;
    for (j, s) in sqrt_vals.iter().enumerate() {
        l.column_mut(j).scale_mut(*s);
    }
    Ok((scale, l, false, SamplerMethod::EigenClipped, events))
}

fn lower_mul(l: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    let m = z.len();
    let mut out = DVector::zeros(m);
    // column-major storage: accumulate column by column
    for j in 0..m {
        let zj = z[j];
        if zj == 0.0 {
            continue;
        }
        let col = l.column(j);
        for i in j..m {
            out[i] += col[i] * zj;
        }
    }
    out
}

/// Stationary Gaussian sequence with autocovariance `acov` by the
/// Durbin-Levinson (Hosking) recursion; O(n^2) time, O(n) memory.
fn levinson_noise<R: Rng + ?Sized>(acov: &[f64], rng: &mut R) -> Vec<f64> {
    let n = acov.len();
    let mut x = Vec::with_capacity(n);
    let mut phi = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut v = acov[0];
    x.push(v.sqrt() * rng.sample::<f64, _>(StandardNormal));
    for k in 1..n {
        let mut num = acov[k];
        for j in 1..k {
            num -= prev[j] * acov[k - j];
        }
        let pkk = num / v;
        for j in 1..k {
            phi[j] = prev[j] - pkk * prev[k - j];
        }
        phi[k] = pkk;
        v *= 1.0 - pkk * pkk;
        let mut mean = 0.0;
        for j in 1..=k {
            mean += phi[j] * x[k - j];
        }
        x.push(mean + v.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal));
        prev[1..=k].copy_from_slice(&phi[1..=k]);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hurst(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn same_seed_same_path() {
        let g = TimeGrid::uniform(64, 0.0, 1.0).unwrap();
        let s = FbmSampler::new(hurst(0.7), &g, CovarianceModel::default()).unwrap();
        let a = s.sample(11);
        let b = s.sample(11);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), s.sample(12).values());
        assert_eq!(a.values()[0], 0.0);
    }

    #[test]
    fn rejects_grid_without_origin() {
        let g = TimeGrid::from_times(&[0.1, 0.5, 1.0]).unwrap();
        assert!(FbmSampler::new(hurst(0.7), &g, CovarianceModel::default()).is_err());
    }

    #[test]
    fn levinson_and_dense_agree_in_law() {
        // compare empirical lag-1 increment covariance of both routes
        let dense_grid = TimeGrid::uniform(16, 0.0, 1.0).unwrap();
        let long_grid = TimeGrid::uniform(1024, 0.0, 1.0).unwrap();
        let hh = hurst(0.8);
        let d = FbmSampler::new(hh, &dense_grid, CovarianceModel::default()).unwrap();
        let l = FbmSampler::new(hh, &long_grid, CovarianceModel::default()).unwrap();
        assert_eq!(d.method(), SamplerMethod::Cholesky);
        assert_eq!(l.method(), SamplerMethod::Levinson);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 400;
        let mut acc = 0.0;
        for _ in 0..trials {
            let inc = l.sample_increments(&mut rng);
            let s = 1024f64.powf(0.8);
            for w in inc.windows(2) {
                acc += w[0] * w[1] * s * s;
            }
        }
        let est = acc / (trials as f64 * 1023.0);
        let exact = autocovariance_rho(1, hh);
        assert!((est - exact).abs() < 0.03, "{est} vs {exact}");
    }

    #[test]
    fn clustered_grid_factorizes() {
        let tails: Vec<f64> = (0..60).map(|k| 0.5 * (-(k as f64) * 0.4).exp()).collect();
        let mut pts = vec![crate::grid::GridPoint::from_t(0.0), crate::grid::GridPoint::from_t(0.25)];
        pts.extend(tails.iter().map(|&q| crate::grid::GridPoint::from_tail(q)));
        let g = TimeGrid::from_points(pts).unwrap();
        let s = FbmSampler::new(hurst(0.7), &g, CovarianceModel::default()).unwrap();
        assert!(s.sample(1).values().iter().all(|v| v.is_finite()));
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::causal::CausalView;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Stream used for drivers independent of the fBm path.
const DRIVER_STREAM: u64 = 0x5749_454e;

/// Lipschitz maps applied pointwise to the fBm path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum LipschitzMap {
    Identity,
    Zero,
    Sine,
    Scaled { factor: f64 },
}

impl LipschitzMap {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            LipschitzMap::Identity => x,
            LipschitzMap::Zero => 0.0,
            LipschitzMap::Sine => x.sin(),
            LipschitzMap::Scaled { factor } => factor * x,
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match *self {
            LipschitzMap::Identity | LipschitzMap::Sine => 1.0,
            LipschitzMap::Zero => 0.0,
            LipschitzMap::Scaled { factor } => factor.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    Constant { value: f64 },
    LipschitzOfFbm { map: LipschitzMap },
    /// `Z(t) = int_{1/2}^t |log(1 - s)|^{-d} dW(s)` for an independent
    /// Wiener process.
    LogHolderWiener { d: f64 },
}

/// Adapted target process `Z` with `xi = Z(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetProcess {
    pub kind: TargetKind,
    /// Values of an independent driver on the construction grid.
    driver: Option<Vec<f64>>,
}

pub fn target_constant(value: f64) -> TargetProcess {
    TargetProcess {
        kind: TargetKind::Constant { value },
        driver: None,
    }
}

/// `Z(t) = f(B^H(t))`.
pub fn target_lipschitz(map: LipschitzMap) -> TargetProcess {
    TargetProcess {
        kind: TargetKind::LipschitzOfFbm { map },
        driver: None,
    }
}

/// Samples the log-Hölder target on `grid` (which must end at 1) with
/// increments of exact variance
/// `(u_i^{1-2d} - u_{i+1}^{1-2d}) / (2d - 1)`, `u = -ln(1 - t)`.
pub fn target_log_holder(d: f64, grid: &TimeGrid, seed: u64) -> Result<TargetProcess> {
    if !(d > 1.0) {
        return Err(Error::parameter(format!("log-Hölder exponent d = {d} must exceed 1")));
    }
    if grid.last().tail != 0.0 {
        return Err(Error::domain("the target grid must end at t = 1"));
    }
    let e = 1.0 - 2.0 * d;
    let tail_var = |u: f64| if u.is_infinite() { 0.0 } else { u.powf(e) / (2.0 * d - 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DRIVER_STREAM);
    let mut values = Vec::with_capacity(grid.len());
    let mut prev_u = 2f64.ln();
    let mut z = 0.0;
    for p in grid.points() {
        if p.t > 0.5 {
            let u = p.log_gap();
            let var = (tail_var(prev_u) - tail_var(u)).max(0.0);
            z += var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            prev_u = u;
        }
        values.push(z);
    }
    Ok(TargetProcess {
        kind: TargetKind::LogHolderWiener { d },
        driver: Some(values),
    })
}

impl TargetProcess {
    pub fn driver(&self) -> Option<&[f64]> {
        self.driver.as_deref()
    }

    /// Nominal exponent `a` in `|Z(1) - Z(t)| <= C |log(1 - t)|^{-a}`.
    pub fn holder_exponent(&self) -> f64 {
        match self.kind {
            TargetKind::Constant { .. } => f64::INFINITY,
            // Hölder in t, hence log-Hölder of every order
            TargetKind::LipschitzOfFbm { .. } => f64::INFINITY,
            TargetKind::LogHolderWiener { d } => d - 0.5,
        }
    }

    /// `Z` at grid index `idx`, reading the path or the driver through the
    /// audited views.
    pub fn eval(&self, path: &mut CausalView<'_>, driver: &mut CausalView<'_>, idx: usize) -> f64 {
        match self.kind {
            TargetKind::Constant { value } => value,
            TargetKind::LipschitzOfFbm { map } => map.apply(path.read(idx)),
            TargetKind::LogHolderWiener { .. } => driver.read(idx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps() {
        assert_eq!(LipschitzMap::Sine.apply(0.0), 0.0);
        assert_eq!(LipschitzMap::Scaled { factor: -2.0 }.lipschitz_constant(), 2.0);
        assert_eq!(LipschitzMap::Zero.apply(3.0), 0.0);
    }

    #[test]
    fn log_holder_variance() {
        // Var Z(1) = (ln 2)^{1-2d} / (2d - 1)
        let d = 2.0;
        let grid = TimeGrid::from_times(&[0.0, 0.5, 0.9, 0.99, 1.0]).unwrap();
        let trials = 20_000;
        let mut s2 = 0.0;
        for seed in 0..trials {
            let z = target_log_holder(d, &grid, seed).unwrap();
            let v = z.driver().unwrap();
            assert_eq!(v[0], 0.0);
            assert_eq!(v[1], 0.0);
            s2 += v[4] * v[4];
        }
        let var = s2 / trials as f64;
        let exact = 2f64.ln().powf(-3.0) / 3.0;
        assert!((var / exact - 1.0).abs() < 0.04, "{var} vs {exact}");
        assert!(target_log_holder(1.0, &grid, 0).is_err());
    }
}

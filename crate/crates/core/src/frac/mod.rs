//! Weyl-form Riemann-Liouville derivatives on sampled functions, the
//! extended fractional integral, and its two oracles (Young sums and
//! mollified classical integrals).
//!
//! Sampled functions are piecewise linear with possible jumps at the nodes,
//! so both fractional derivatives are finite sums of power functions and are
//! evaluated exactly. Only the outer integrals use quadrature.

mod cells;
mod integral;
mod mollifier;
mod quadrature;

pub use cells::CellFunction;
pub use integral::{
    extended_fractional_integral, extended_fractional_integral_on, extended_integral_of_fns,
    fit_holder_exponent, left_derivative_norms_from, rl_derivative_left, rl_derivative_left_fn, rl_derivative_right,
    rl_derivative_right_fn, rl_integral_left, weighted_l1_norm, weighted_l1_norm_of, young_sum_integral,
    young_sum_of_fns, IntegralEstimate, IntegralOptions, RegularityCertificate, WeightedNorm, YoungRule,
};
pub use mollifier::{bump, bump_cdf, lemma6_discrepancy, mollified_derivative, mollified_integral};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{HurstParam, SamplePath};
use crate::grid::{GridPoint, TimeGrid};

/// Fractional order in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(FracOrder(alpha))
        } else {
            Err(Error::domain(format!("fractional order {alpha} is not in (0, 1)")))
        }
    }

    /// Order paired with an fBm of index `H`: `1 - H < alpha < 1/2`.
    pub fn for_hurst(alpha: f64, hurst: HurstParam) -> Result<Self> {
        let lo = 1.0 - hurst.value();
        if alpha > lo && alpha < 0.5 {
            Ok(FracOrder(alpha))
        } else {
            Err(Error::domain(format!(
                "alpha = {alpha} must lie in (1 - H, 1/2) = ({lo}, 0.5)"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - alpha`.
    pub fn dual(self) -> FracOrder {
        FracOrder(1.0 - self.0)
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        FracOrder::new(v)
    }
}

impl From<FracOrder> for f64 {
    fn from(a: FracOrder) -> f64 {
        a.0
    }
}

/// `rho(x) = (1 - x)^exponent |ln(1 - x)|^mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogWeight {
    pub exponent: f64,
    pub mu: f64,
}

impl LogWeight {
    pub fn new(exponent: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.5) || !exponent.is_finite() {
            return Err(Error::domain(format!("log weight needs mu > 1/2, got {mu}")));
        }
        Ok(LogWeight { exponent, mu })
    }

    /// The weight `(1 - x)^{H + alpha - 1} |ln(1 - x)|^mu`.
    pub fn for_integrand(hurst: HurstParam, alpha: FracOrder, mu: f64) -> Result<Self> {
        Self::new(hurst.value() + alpha.value() - 1.0, mu)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_point(&GridPoint::from_t(x))
    }

    pub fn eval_point(&self, p: &GridPoint) -> f64 {
        let u = p.log_gap();
        if u == 0.0 {
            return 0.0;
        }
        (-self.exponent * u).exp() * u.powf(self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Value `v_i` on `[t_i, t_{i+1})`.
    PiecewiseConstantLeft,
    PiecewiseLinear,
}

/// A function known through its values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: TimeGrid,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl SampledFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::domain("grid and values differ in length"));
        }
        if grid.len() < 2 {
            return Err(Error::domain("a sampled function needs at least two points"));
        }
        Ok(SampledFunction {
            grid,
            values,
            interpolation,
        })
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64, interpolation: Interpolation) -> Result<Self> {
        let values = grid.points().iter().map(|p| f(p.t)).collect();
        Self::new(grid.clone(), values, interpolation)
    }

    /// Samples `f` given as a function of the grid point (for functions
    /// whose behaviour near 1 is best written in terms of the tail).
    pub fn from_point_fn(
        grid: &TimeGrid,
        f: impl Fn(&GridPoint) -> f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let values = grid.points().iter().map(f).collect();
        Self::new(grid.clone(), values, interpolation)
    }

    pub fn from_path(path: &SamplePath) -> Self {
        SampledFunction {
            grid: path.grid().clone(),
            values: path.values().to_vec(),
            interpolation: Interpolation::PiecewiseLinear,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn cells(&self) -> CellFunction {
        CellFunction::from_sampled(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_windows() {
        let h = HurstParam::new(0.6).unwrap();
        assert!(FracOrder::for_hurst(0.45, h).is_ok());
        assert!(FracOrder::for_hurst(0.3, h).is_err());
        assert!(FracOrder::for_hurst(0.5, h).is_err());
        assert!(FracOrder::new(1.0).is_err());
    }

    #[test]
    fn weight_vanishes_at_origin_and_decreases_near_one() {
        let w = LogWeight::new(0.2, 0.75).unwrap();
        assert_eq!(w.eval(0.0), 0.0);
        let tails = [1e-2, 1e-4, 1e-8, 1e-12];
        let vals: Vec<f64> = tails.iter().map(|&q| w.eval_point(&GridPoint::from_tail(q))).collect();
        assert!(vals.windows(2).all(|v| v[1] < v[0]));
        assert!(LogWeight::new(0.2, 0.5).is_err());
    }
}

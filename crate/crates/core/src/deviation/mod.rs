//! Increment autocovariance of fBm, the squared-covariance sum `S_n`, its
//! growth regimes, and small-deviation bounds with Monte Carlo checks.

mod bound;
mod montecarlo;

pub use bound::{corrected_small_dev_bound, gaussian_small_dev_bound, increment_covariance_matrix};
pub use montecarlo::{mc_gaussian_quadratic, mc_small_deviation, MCEstimate, WILSON_Z99};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::HurstParam;

/// Lags up to this use the closed form directly.
const DIRECT_LAG_LIMIT: u64 = 64;

/// `rho_H(m) = ((m+1)^{2H} + |m-1|^{2H} - 2 m^{2H}) / 2`, the covariance of
/// unit-spaced fBm increments at lag `m`.
///
/// For large lags the second central difference of `x^{2H}` is expanded as
/// `m^{2H} sum_k C(2H, 2k) m^{-2k}`, which has no cancellation.
pub fn autocovariance_rho(m: u64, hurst: HurstParam) -> f64 {
    let p = hurst.two_h();
    if m == 0 {
        return 1.0;
    }
    let x = m as f64;
    if m <= DIRECT_LAG_LIMIT {
        return 0.5 * ((x + 1.0).powf(p) + (x - 1.0).powf(p) - 2.0 * x.powf(p));
    }
    let inv2 = 1.0 / (x * x);
    // C(p, 2k) built incrementally
    let mut coeff = p * (p - 1.0) / 2.0;
    let mut pow = inv2;
    let mut sum = coeff * pow;
    let mut k = 1.0;
    loop {
        let j = 2.0 * k;
        coeff *= (p - j) * (p - j - 1.0) / ((j + 1.0) * (j + 2.0));
        pow *= inv2;
        let term = coeff * pow;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
    }
    x.powf(p) * sum
}

/// `S_n = sum_{i,j<n} rho(|i-j|)^2 = n + 2 sum_{m=1}^{n-1} (n-m) rho(m)^2`.
pub fn squared_cov_sum(n: u64, hurst: HurstParam) -> f64 {
    let mut acc = 0.0;
    for m in (1..n).rev() {
        let r = autocovariance_rho(m, hurst);
        acc += (n - m) as f64 * r * r;
    }
    n as f64 + 2.0 * acc
}

/// Truncated limit of `S_n / n` for `H < 3/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConstant {
    /// `sum_{|m| <= m_max} rho(|m|)^2`.
    pub value: f64,
    pub m_max: u64,
    /// Estimate of the omitted tail from `rho(m) ~ H(2H-1) m^{2H-2}`.
    pub tail_estimate: f64,
}

pub fn series_constant(hurst: HurstParam, m_max: u64) -> Result<SeriesConstant> {
    let h = hurst.value();
    if h >= 0.75 {
        return Err(Error::domain("the squared autocovariance series diverges for H >= 3/4"));
    }
    let mut acc = 0.0;
    for m in (1..=m_max).rev() {
        let r = autocovariance_rho(m, hurst);
        acc += r * r;
    }
    let c = h * (2.0 * h - 1.0);
    let e = 4.0 * h - 3.0;
    let tail = 2.0 * c * c * (m_max as f64 + 0.5).powf(e) / -e;
    Ok(SeriesConstant {
        value: 1.0 + 2.0 * acc,
        m_max,
        tail_estimate: tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Sub34,
    At34,
    Super34,
}

/// Growth regime of `S_n` and the matching small-deviation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRegime {
    pub hurst: HurstParam,
    pub regime: Regime,
}

impl RateRegime {
    pub fn new(hurst: HurstParam) -> Self {
        let h = hurst.value();
        let regime = if h < 0.75 {
            Regime::Sub34
        } else if h == 0.75 {
            Regime::At34
        } else {
            Regime::Super34
        };
        RateRegime { hurst, regime }
    }

    /// `r(n)`: `n`, `n / ln n` or `n^{4-4H}`.
    pub fn rate(&self, n: u64) -> Result<f64> {
        if n < 2 {
            return Err(Error::domain(format!("rate needs n >= 2, got {n}")));
        }
        let x = n as f64;
        Ok(match self.regime {
            Regime::Sub34 => x,
            Regime::At34 => x / x.ln(),
            Regime::Super34 => x.powf(4.0 - 4.0 * self.hurst.value()),
        })
    }

    /// Normalization of `S_n`: `n`, `n ln n` or `n^{4H-2}`.
    pub fn growth(&self, n: u64) -> f64 {
        let x = n as f64;
        match self.regime {
            Regime::Sub34 => x,
            Regime::At34 => x * x.ln(),
            Regime::Super34 => x.powf(4.0 * self.hurst.value() - 2.0),
        }
    }
}

pub fn small_dev_rate(n: u64, hurst: HurstParam) -> Result<f64> {
    RateRegime::new(hurst).rate(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn rho_examples() {
        assert_eq!(autocovariance_rho(0, h(0.6)), 1.0);
        assert!((autocovariance_rho(1, h(0.75)) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let m = 1_000_000u64;
        let ratio = autocovariance_rho(m, h(0.7)) / (0.7 * 0.4 * (m as f64).powf(-0.6));
        assert!((0.999..=1.001).contains(&ratio), "{ratio}");
    }

    #[test]
    fn series_branch_matches_direct_formula_at_switch() {
        for hv in [0.55, 0.7, 0.9] {
            let hh = h(hv);
            let p = 2.0 * hv;
            for m in [65u64, 80, 200] {
                let x = m as f64;
                let direct = 0.5 * ((x + 1.0).powf(p) + (x - 1.0).powf(p) - 2.0 * x.powf(p));
                let s = autocovariance_rho(m, hh);
                assert!((s - direct).abs() < 1e-9 * direct.abs(), "{m} {s} {direct}");
            }
        }
    }

    #[test]
    fn rho_positive_for_long_memory() {
        for hv in [0.51, 0.6, 0.9] {
            assert!((1..=10_000).all(|m| autocovariance_rho(m, h(hv)) > 0.0));
        }
    }

    #[test]
    fn squared_sum_examples() {
        assert_eq!(squared_cov_sum(1, h(0.3)), 1.0);
        let s2 = squared_cov_sum(2, h(0.6));
        assert!((s2 - 2.044_222_401_557_648_5).abs() < 1e-13, "{s2}");
    }

    #[test]
    fn rates() {
        assert_eq!(small_dev_rate(100, h(0.6)).unwrap(), 100.0);
        assert!((small_dev_rate(7, h(0.75)).unwrap() - 3.597_288_396_588_255).abs() < 1e-12);
        assert!((small_dev_rate(16, h(0.8)).unwrap() - 9.189_586_839_976_28).abs() < 1e-12);
        assert!(small_dev_rate(1, h(0.75)).is_err());
        assert_eq!(RateRegime::new(h(0.75)).regime, Regime::At34);
    }
}

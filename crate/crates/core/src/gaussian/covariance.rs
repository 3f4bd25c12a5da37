use crate::error::{Error, Result};
use crate::grid::GridPoint;

use super::HurstParam;

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, hurst: HurstParam) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("times ({t}, {s}) must lie in [0, 1]")));
    }
    let p = hurst.two_h();
    // sum the two powers in a fixed order so the result is symmetric bit for bit
    let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
    Ok(0.5 * (lo.powf(p) + hi.powf(p) - (hi - lo).powf(p)))
}

/// `E[(B_b - B_a)(B_d - B_c)]` for `a < b`, `c < d`, from lags only.
pub fn increment_covariance(a: f64, b: f64, c: f64, d: f64, hurst: HurstParam) -> Result<f64> {
    for x in [a, b, c, d] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("time {x} outside [0, 1]")));
        }
    }
    if !(a < b) || !(c < d) {
        return Err(Error::domain("increments need a < b and c < d"));
    }
    Ok(increment_covariance_points(
        &GridPoint::from_t(a),
        &GridPoint::from_t(b),
        &GridPoint::from_t(c),
        &GridPoint::from_t(d),
        hurst.two_h(),
    ))
}

/// `(y + h)^p - y^p` without cancellation.
#[inline]
fn forward_power_difference(y: f64, h: f64, p: f64) -> f64 {
    if y == 0.0 {
        h.powf(p)
    } else {
        y.powf(p) * (p * (h / y).ln_1p()).exp_m1()
    }
}

/// Increment covariance on grid points with exponent `p = 2H`.
///
/// Disjoint intervals use the mixed second difference of `x^p` written as a
/// difference of forward differences, which keeps relative accuracy when the
/// intervals are tiny compared with their distance.
pub fn increment_covariance_points(
    a: &GridPoint,
    b: &GridPoint,
    c: &GridPoint,
    d: &GridPoint,
    p: f64,
) -> f64 {
    // order so that [a, b] starts first
    let (a, b, c, d) = if a.lag_to(c) >= 0.0 { (a, b, c, d) } else { (c, d, a, b) };
    let h1 = a.lag_to(b);
    let h2 = c.lag_to(d);
    if a == c && b == d {
        return h1.powf(p);
    }
    let gap = b.lag_to(c);
    if gap >= 0.0 {
        let near = forward_power_difference(gap, h2, p);
        let far = forward_power_difference(gap + h1, h2, p);
        return 0.5 * (far - near);
    }
    // overlapping intervals
    let l_bc = b.lag_to(c).abs();
    let l_ad = a.lag_to(d).abs();
    let l_bd = b.lag_to(d).abs();
    let l_ac = a.lag_to(c).abs();
    0.5 * (l_bc.powf(p) + l_ad.powf(p) - l_bd.powf(p) - l_ac.powf(p))
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::HurstParam;

use super::autocovariance_rho;

fn trace_and_frobenius(x: f64, cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !cov.is_square() || cov.nrows() == 0 {
        return Err(Error::domain("covariance must be a non-empty square matrix"));
    }
    let tr = cov.trace();
    if !(x > 0.0 && x < tr) {
        return Err(Error::domain(format!("x = {x} must lie in (0, trace = {tr})")));
    }
    Ok((tr, cov.iter().map(|c| c * c).sum()))
}

/// `exp(-(x - tr C)^2 / sum_ij C_ij^2)` for `P(sum X_i^2 <= x)`.
pub fn gaussian_small_dev_bound(x: f64, cov: &DMatrix<f64>) -> Result<f64> {
    let (tr, fro) = trace_and_frobenius(x, cov)?;
    Ok((-(x - tr).powi(2) / fro).exp())
}

/// Same bound with the constant 4 from the Laurent-Massart lower-tail
/// inequality, `exp(-(tr C - x)^2 / (4 sum_ij C_ij^2))`.
pub fn corrected_small_dev_bound(x: f64, cov: &DMatrix<f64>) -> Result<f64> {
    let (tr, fro) = trace_and_frobenius(x, cov)?;
    Ok((-(x - tr).powi(2) / (4.0 * fro)).exp())
}

/// Covariance of `n` unit-spaced fBm increments, `rho_H(|i - j|)`.
pub fn increment_covariance_matrix(n: usize, hurst: HurstParam) -> DMatrix<f64> {
    let rho: Vec<f64> = (0..n).map(|m| autocovariance_rho(m as u64, hurst)).collect();
    DMatrix::from_fn(n, n, |i, j| rho[i.abs_diff(j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let b = gaussian_small_dev_bound(0.5, &one).unwrap();
        assert!((b - 0.778_800_783_071_404_9).abs() < 1e-15);
        let id = DMatrix::<f64>::identity(8, 8);
        let b = gaussian_small_dev_bound(4.0, &id).unwrap();
        assert!((b - 0.135_335_283_236_612_7).abs() < 1e-15);
        let near = gaussian_small_dev_bound(8.0 - 1e-9, &id).unwrap();
        assert!((near - 1.0).abs() < 1e-12);
        assert!(gaussian_small_dev_bound(0.0, &id).is_err());
        assert!(gaussian_small_dev_bound(8.0, &id).is_err());
    }

    #[test]
    fn corrected_bound_is_weaker() {
        let c = increment_covariance_matrix(16, HurstParam::new(0.6).unwrap());
        let x = 0.5 * c.trace();
        assert!(corrected_small_dev_bound(x, &c).unwrap() > gaussian_small_dev_bound(x, &c).unwrap());
    }
}

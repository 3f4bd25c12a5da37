//! Covariance kernels of fractional Brownian motion, exact Gaussian sampling
//! on arbitrary grids, and path statistics.

mod covariance;
mod path;
mod sampler;

pub use covariance::{fbm_covariance, increment_covariance, increment_covariance_points};
pub use path::{modulus_statistic, SamplePath, SamplePathRecord};
pub use sampler::{sample_fbm, AssemblyMode, ClipEvent, CovarianceModel, FbmSampler, SamplerMethod};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst index in `(0, 1)`.
///
/// Samplers accept the whole open interval; operations that implement the
/// long-memory results call [`HurstParam::require_long_memory`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(HurstParam(value))
        } else {
            Err(Error::domain(format!("Hurst index {value} is not in (0, 1)")))
        }
    }

    /// Same as [`HurstParam::new`] but also requires `H > 1/2`.
    pub fn long_memory(value: f64) -> Result<Self> {
        Self::new(value)?.require_long_memory()
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `H in (1/2, 1)`.
    pub fn in_long_memory_range(self) -> bool {
        self.0 > 0.5
    }

    pub fn require_long_memory(self) -> Result<Self> {
        if self.in_long_memory_range() {
            Ok(self)
        } else {
            Err(Error::domain(format!(
                "Hurst index {} must exceed 1/2 for this operation",
                self.0
            )))
        }
    }

    pub fn two_h(self) -> f64 {
        2.0 * self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        HurstParam::new(v)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

//! Browser bindings: sample paths, squared-covariance growth and one
//! representation run. Every export returns JSON text.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fbmlab::deviation::{squared_cov_sum, RateRegime};
use fbmlab::gaussian::{sample_fbm, CovarianceModel, FbmSampler};
use fbmlab::representation::{
    build_partition, build_representation, construction_grid, target_constant, target_lipschitz, GridLayout,
    LipschitzMap, RepresentationTrace,
};
use fbmlab::{HurstParam, Result, TimeGrid};

#[derive(Serialize)]
pub struct PathOut {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub s_n: f64,
    /// `S_n` over its growth rate (`n`, `n log n` or `n^{4H-2}`).
    pub normalized: f64,
}

#[derive(Serialize)]
pub struct CurveOut {
    pub regime: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Serialize)]
pub struct RepresentationOut {
    pub t: Vec<f64>,
    pub path: Vec<f64>,
    /// Running value `int_0^t psi dB` on the same grid.
    pub running: Vec<f64>,
    pub trace: RepresentationTrace,
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

pub fn sample(hurst: f64, cells: usize, seed: u64) -> Result<PathOut> {
    let grid = TimeGrid::uniform(cells, 0.0, 1.0)?;
    let path = sample_fbm(HurstParam::new(hurst)?, &grid, seed, CovarianceModel::default())?;
    Ok(PathOut {
        t: grid.times(),
        value: path.values().to_vec(),
    })
}

pub fn curve(hurst: f64, max_log2: u32) -> Result<CurveOut> {
    let h = HurstParam::long_memory(hurst)?;
    let rr = RateRegime::new(h);
    let points = (1..=max_log2.min(16))
        .map(|k| {
            let n = 1u64 << k;
            let s_n = squared_cov_sum(n, h);
            CurvePoint {
                n,
                s_n,
                normalized: s_n / rr.growth(n),
            }
        })
        .collect();
    Ok(CurveOut {
        regime: format!("{:?}", rr.regime),
        points,
    })
}

pub fn represent(hurst: f64, kappa: f64, a: f64, n_max: usize, seed: u64, target: &str) -> Result<RepresentationOut> {
    let h = HurstParam::long_memory(hurst)?;
    let scheme = build_partition(kappa, a, n_max, h)?;
    let cg = construction_grid(&scheme, GridLayout::default())?;
    let sampler = FbmSampler::new(h, &cg.grid, CovarianceModel::default())?;
    let path = sampler.sample(seed);
    let target = match target {
        "zero" => target_constant(0.0),
        "sine" => target_lipschitz(LipschitzMap::Sine),
        _ => target_lipschitz(LipschitzMap::Identity),
    };
    let (psi, trace) = build_representation(&target, &path, &scheme, &cg)?;
    let v = path.values();
    let mut running = vec![0.0; v.len()];
    for b in psi.blocks() {
        for i in b.start + 1..=b.end {
            let x = v[i] - v[b.start];
            running[i] = 0.5 * b.coefficient * x * x;
        }
    }
    // blocks are disjoint and ordered: accumulate completed ones
    let mut done = 0.0;
    let mut out = vec![0.0; v.len()];
    let mut blocks = psi.blocks().iter().peekable();
    for i in 0..v.len() {
        while let Some(b) = blocks.peek() {
            if b.end < i {
                done += running[b.end];
                blocks.next();
            } else {
                break;
            }
        }
        out[i] = done + blocks.peek().filter(|b| b.start < i).map_or(0.0, |_| running[i]);
    }
    Ok(RepresentationOut {
        t: cg.grid.times(),
        path: v.to_vec(),
        running: out,
        trace,
    })
}

/// `{t, value}` for one fBm path on `cells` uniform steps.
#[wasm_bindgen]
pub fn sample_path(hurst: f64, cells: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(sample(hurst, cells, seed))
}

/// `S_n` and its normalization for `n = 2, 4, ..., 2^max_log2`.
#[wasm_bindgen]
pub fn squared_sum_curve(hurst: f64, max_log2: u32) -> std::result::Result<String, JsError> {
    to_js(curve(hurst, max_log2))
}

/// One representation run on the construction grid.
#[wasm_bindgen]
pub fn representation_run(
    hurst: f64,
    kappa: f64,
    a: f64,
    n_max: usize,
    seed: u64,
    target: &str,
) -> std::result::Result<String, JsError> {
    to_js(represent(hurst, kappa, a, n_max, seed, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_has_grid_length() {
        let p = sample(0.7, 64, 1).unwrap();
        assert_eq!(p.t.len(), 65);
        assert_eq!(p.value[0], 0.0);
    }

    #[test]
    fn curve_normalization_settles() {
        for h in [0.6, 0.85] {
            let c = curve(h, 14).unwrap();
            let last = &c.points[c.points.len() - 2..];
            assert!((last[0].normalized / last[1].normalized - 1.0).abs() < 0.02, "H = {h}");
        }
    }

    #[test]
    fn running_integral_ends_at_final_value() {
        let r = represent(0.7, 2.2, 3.0, 6, 3, "identity").unwrap();
        let end = *r.running.last().unwrap();
        assert!((end - r.trace.summary.final_value).abs() < 1e-9 * (1.0 + end.abs()));
        assert!(represent(0.4, 2.2, 3.0, 6, 3, "identity").is_err());
    }
}

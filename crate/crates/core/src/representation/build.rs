use std::io::Write;

use serde::{Deserialize, Serialize};

use super::causal::{CausalView, CausalityAudit};
use super::partition::{ConstructionGrid, PartitionScheme};
use super::steps::{case1_step, case2_step, Case, StepBlock};
use super::target::{TargetKind, TargetProcess};
use crate::error::{Error, Result};
use crate::frac::{left_derivative_norms_from, CellFunction, IntegralOptions, LogWeight};
use crate::gaussian::{HurstParam, SamplePath};
use crate::grid::{GridPoint, TimeGrid};

/// The adapted step integrand `psi`, zero outside its active blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepIntegrand {
    grid: TimeGrid,
    path: Vec<f64>,
    blocks: Vec<StepBlock>,
}

impl StepIntegrand {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn blocks(&self) -> &[StepBlock] {
        &self.blocks
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `int psi dB` over the active blocks, `sum c/2 (Delta B)^2`.
    pub fn stochastic_integral(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| 0.5 * b.coefficient * (self.path[b.end] - self.path[b.start]).powi(2))
            .sum()
    }

    /// `psi` as a cell function over `[0, 1]` (linear in the interpolated
    /// path inside each block), with runs of zero cells merged.
    pub fn cell_function(&self) -> Result<CellFunction> {
        let pts = self.grid.points();
        let k = pts.len() - 1;
        let mut start = vec![0.0; k];
        let mut slope = vec![0.0; k];
        for b in &self.blocks {
            let base = self.path[b.start];
            for i in b.start..b.end {
                start[i] = b.coefficient * (self.path[i] - base);
                slope[i] = b.coefficient * (self.path[i + 1] - self.path[i]) / pts[i].lag_to(&pts[i + 1]);
            }
        }
        let active = |i: usize| i < k && (start[i] != 0.0 || slope[i] != 0.0);
        let mut nodes = Vec::new();
        let mut s = Vec::new();
        let mut d = Vec::new();
        for i in 0..k {
            if i == 0 || active(i) || active(i - 1) {
                nodes.push(pts[i]);
                s.push(start[i]);
                d.push(slope[i]);
            }
        }
        nodes.push(pts[k]);
        CellFunction::new(nodes, s, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: usize,
    pub case: Case,
    pub t_start: f64,
    pub xi_n: f64,
    /// `V(t_n)`.
    pub v_start: f64,
    /// `xi_n - V(t_n)`.
    pub gap: f64,
    /// `V(t_{n+1})`.
    pub v_end: f64,
    pub blocks_used: usize,
    /// Where the level's integrand was switched off.
    pub t_stop: f64,
    pub exhausted: bool,
    /// `|V(t_{n+1}) - xi_n|`.
    pub overshoot: f64,
    pub max_block_term: f64,
    /// `|xi_n - xi|`.
    pub xi_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSummary {
    pub xi: f64,
    pub xi_0: f64,
    pub final_value: f64,
    pub final_error: f64,
    /// `|xi_{n_max} - xi| + overshoot_{n_max}`.
    pub final_bound: f64,
    /// `max_n |xi_n - xi| kappa^n`.
    pub certificate: f64,
    /// First level from which `|xi_m - xi| <= 2^{-m}` holds throughout.
    pub n_omega: Option<usize>,
    /// First level from which every level runs Case 2 without exhaustion.
    pub eventual_case2_from: Option<usize>,
    pub exhausted_levels: usize,
    pub active_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationTrace {
    pub kappa: f64,
    pub a: f64,
    pub n_max: usize,
    pub hurst: f64,
    pub seed: u64,
    pub target: TargetKind,
    pub levels: Vec<LevelRecord>,
    pub summary: RepresentationSummary,
    pub causality: CausalityAudit,
}

impl RepresentationTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per level.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for l in &self.levels {
            wr.serialize(l).map_err(|e| Error::Format(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn levels_in_case(&self, case: Case) -> usize {
        self.levels.iter().filter(|l| l.case == case).count()
    }

    /// Every level `n >= from` ran Case 2 and stopped in time.
    pub fn case2_from(&self, from: usize) -> bool {
        self.levels
            .iter()
            .filter(|l| l.n >= from)
            .all(|l| l.case == Case::Two && !l.exhausted)
    }
}

fn same_grid(a: &TimeGrid, b: &TimeGrid) -> bool {
    a.len() == b.len()
        && a
            .points()
            .iter()
            .zip(b.points())
            .all(|(p, q)| p.tail == q.tail && p.t == q.t)
}

/// Runs the level-by-level construction on one sampled path.
pub fn build_representation(
    target: &TargetProcess,
    path: &SamplePath,
    scheme: &PartitionScheme,
    cg: &ConstructionGrid,
) -> Result<(StepIntegrand, RepresentationTrace)> {
    if !same_grid(path.grid(), &cg.grid) {
        return Err(Error::domain("the path must be sampled on the construction grid"));
    }
    if path.hurst() != scheme.hurst {
        return Err(Error::parameter("path and scheme disagree on the Hurst index"));
    }
    let empty: Vec<f64> = Vec::new();
    let driver_values = target.driver().unwrap_or(&empty);
    if target.driver().is_some() && driver_values.len() != cg.grid.len() {
        return Err(Error::domain("the target driver must live on the construction grid"));
    }
    let mut view = CausalView::new(path.values());
    let mut driver = CausalView::new(driver_values);
    let advance = |v: &mut CausalView<'_>, d: &mut CausalView<'_>, i: usize| {
        v.advance(i);
        d.advance(i);
    };

    advance(&mut view, &mut driver, cg.index_t0);
    let xi_0 = target.eval(&mut view, &mut driver, cg.index_t0);
    let mut v = 0.0;
    let mut prev_fired = xi_0 == v;
    let mut levels = Vec::with_capacity(scheme.n_max);
    let mut blocks = Vec::new();
    for lv in &scheme.levels {
        let n = lv.n;
        let idx = cg.sub_points[n - 1][0];
        advance(&mut view, &mut driver, idx);
        let xi_n = target.eval(&mut view, &mut driver, idx);
        let gap = xi_n - v;
        let case = if prev_fired { Case::Two } else { Case::One };
        let out = match case {
            Case::Two => case2_step(&mut view, scheme, cg, n, gap),
            Case::One => case1_step(&mut view, scheme, cg, n, gap),
        };
        let run = out.run;
        let mut bl = out.blocks;
        let v_start = v;
        v += gap.signum() * run.sum;
        blocks.append(&mut bl);
        prev_fired = !run.exhausted;
        levels.push(LevelRecord {
            n,
            case,
            t_start: lv.t,
            xi_n,
            v_start,
            gap,
            v_end: v,
            blocks_used: run.used,
            t_stop: cg.grid.point(out.stop_index).t,
            exhausted: run.exhausted,
            overshoot: (v - xi_n).abs(),
            max_block_term: run.max_term,
            xi_error: 0.0,
        });
        let end = cg.sub_points[n - 1][n];
        advance(&mut view, &mut driver, end);
    }
    advance(&mut view, &mut driver, cg.index_one);
    let xi = target.eval(&mut view, &mut driver, cg.index_one);

    let mut certificate: f64 = 0.0;
    for l in &mut levels {
        l.xi_error = (l.xi_n - xi).abs();
        certificate = certificate.max(l.xi_error * scheme.kappa.powi(l.n as i32));
    }
    let n_omega = levels
        .iter()
        .rev()
        .take_while(|l| l.xi_error <= 2f64.powi(-(l.n as i32)))
        .last()
        .map(|l| l.n);
    let eventual_case2_from = levels
        .iter()
        .rev()
        .take_while(|l| l.case == Case::Two && !l.exhausted)
        .last()
        .map(|l| l.n);
    let last = levels.last().expect("n_max >= 2");
    let summary = RepresentationSummary {
        xi,
        xi_0,
        final_value: v,
        final_error: (v - xi).abs(),
        final_bound: last.xi_error + last.overshoot,
        certificate,
        n_omega,
        eventual_case2_from,
        exhausted_levels: levels.iter().filter(|l| l.exhausted).count(),
        active_blocks: blocks.len(),
    };
    let mut causality = view.audit();
    if target.driver().is_some() {
        let d = driver.audit();
        causality.reads += d.reads;
        causality.violations += d.violations;
        causality.digest = format!("{}{}", causality.digest, d.digest);
    }
    let trace = RepresentationTrace {
        kappa: scheme.kappa,
        a: scheme.a,
        n_max: scheme.n_max,
        hurst: scheme.hurst.value(),
        seed: path.seed(),
        target: target.kind,
        levels,
        summary,
        causality,
    };
    let psi = StepIntegrand {
        grid: cg.grid.clone(),
        path: path.values().to_vec(),
        blocks,
    };
    Ok((psi, trace))
}

/// `||D^alpha_{t_N+} psi||` in `L^1([t_N, 1], rho)` with
/// `rho(x) = (1 - x)^{H + alpha - 1} |log(1 - x)|^mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailNorm {
    pub n: usize,
    pub t_start: f64,
    pub value: f64,
    pub diverged: bool,
}

/// Tail norms for `N = 2, ..., n_max - 2`.
pub fn tail_weighted_norm_diagnostic(
    psi: &StepIntegrand,
    scheme: &PartitionScheme,
    alpha: f64,
    mu: f64,
) -> Result<Vec<TailNorm>> {
    let (lo, hi) = scheme.mu_window()?;
    if !(mu > lo && mu < hi) {
        return Err(Error::parameter(format!("mu = {mu} outside the window ({lo}, {hi})")));
    }
    let h = scheme.hurst.value();
    if !(alpha > 1.0 - h && alpha < 0.5) {
        return Err(Error::parameter(format!("alpha = {alpha} outside (1 - H, 1/2) = ({}, 0.5)", 1.0 - h)));
    }
    let weight = LogWeight::for_integrand(HurstParam::new(h)?, crate::frac::FracOrder::new(alpha)?, mu)?;
    let cf = psi.cell_function()?;
    let levels: Vec<usize> = (2..=scheme.n_max.saturating_sub(2)).collect();
    let starts: Vec<GridPoint> = levels.iter().map(|&n| scheme.level(n).start()).collect();
    let norms = left_derivative_norms_from(&cf, alpha, &starts, &weight, &IntegralOptions::default())?;
    Ok(levels
        .iter()
        .zip(starts.iter().zip(norms))
        .map(|(&n, (start, norm))| TailNorm {
            n,
            t_start: start.t,
            value: norm.value,
            diverged: norm.diverged,
        })
        .collect())
}

/// Non-increasing up to `rel_slack` of the previous value.
pub fn is_non_increasing(norms: &[TailNorm], rel_slack: f64) -> bool {
    norms
        .windows(2)
        .all(|w| w[1].value <= w[0].value * (1.0 + rel_slack) + f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{CovarianceModel, FbmSampler};
    use crate::representation::partition::{build_partition, construction_grid, GridLayout};
    use crate::representation::target::{target_constant, target_lipschitz, target_log_holder, LipschitzMap};

    struct Setup {
        scheme: PartitionScheme,
        cg: ConstructionGrid,
        sampler: FbmSampler,
    }

    fn setup(n_max: usize) -> Setup {
        let h = HurstParam::new(0.7).unwrap();
        let scheme = build_partition(2.2, 3.0, n_max, h).unwrap();
        let cg = construction_grid(&scheme, GridLayout::default()).unwrap();
        let sampler = FbmSampler::new(h, &cg.grid, CovarianceModel::default()).unwrap();
        Setup { scheme, cg, sampler }
    }

    #[test]
    fn zero_target_gives_zero_integrand() {
        let s = setup(6);
        let path = s.sampler.sample(3);
        for t in [target_constant(0.0), target_lipschitz(LipschitzMap::Zero)] {
            let (psi, trace) = build_representation(&t, &path, &s.scheme, &s.cg).unwrap();
            assert!(psi.is_zero());
            assert!(trace.levels.iter().all(|l| l.case == Case::Two && l.blocks_used == 0));
            assert_eq!(trace.summary.final_error, 0.0);
        }
    }

    #[test]
    fn identity_target_trace() {
        let s = setup(10);
        let path = s.sampler.sample(11);
        let (psi, trace) = build_representation(&target_lipschitz(LipschitzMap::Identity), &path, &s.scheme, &s.cg).unwrap();
        assert!(trace.causality.ok());
        assert!(trace.causality.reads > 0);
        assert!(trace.summary.final_error <= trace.summary.final_bound * (1.0 + 1e-12));
        assert!((psi.stochastic_integral() - trace.summary.final_value).abs() < 1e-9 * (1.0 + trace.summary.xi.abs()));
        for l in &trace.levels {
            if !l.exhausted && l.gap != 0.0 {
                assert!(l.overshoot <= l.max_block_term * (1.0 + 1e-12) + 1e-300);
            }
        }
        let back = RepresentationTrace::from_json(&trace.to_json().unwrap()).unwrap();
        assert_eq!(back, trace);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }

    #[test]
    fn psi_is_proportional_to_path_increments() {
        let s = setup(6);
        let path = s.sampler.sample(5);
        let (psi, _) = build_representation(&target_lipschitz(LipschitzMap::Sine), &path, &s.scheme, &s.cg).unwrap();
        let cf = psi.cell_function().unwrap();
        let pts = s.cg.grid.points();
        for b in psi.blocks() {
            for (i, p) in pts.iter().enumerate().take(b.end).skip(b.start + 1) {
                let ratio = cf.eval(p) / (path.value(i) - path.value(b.start));
                assert!((ratio / b.coefficient - 1.0).abs() < 1e-9);
            }
            let mid = pts[b.start].lerp(&pts[b.start + 1], 0.5);
            let interp = 0.5 * (path.value(b.start) + path.value(b.start + 1));
            assert!((cf.eval(&mid) / (interp - path.value(b.start)) / b.coefficient - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn look_ahead_is_impossible_by_construction() {
        let s = setup(5);
        let path = s.sampler.sample(8);
        let z = target_log_holder(2.0, &s.cg.grid, 8).unwrap();
        let (_, trace) = build_representation(&z, &path, &s.scheme, &s.cg).unwrap();
        assert!(trace.causality.ok());
        let (_, again) = build_representation(&z, &path, &s.scheme, &s.cg).unwrap();
        assert_eq!(trace.causality.digest, again.causality.digest);
    }

    #[test]
    fn rejects_foreign_grid() {
        let s = setup(4);
        let other = setup(5);
        let path = other.sampler.sample(1);
        assert!(build_representation(&target_constant(1.0), &path, &s.scheme, &s.cg).is_err());
    }

    #[test]
    fn tail_diagnostic_runs() {
        let s = setup(8);
        let path = s.sampler.sample(2);
        let (psi, _) = build_representation(&target_lipschitz(LipschitzMap::Identity), &path, &s.scheme, &s.cg).unwrap();
        let norms = tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.4, 1.0).unwrap();
        assert_eq!(norms.len(), 5);
        assert!(norms.iter().all(|n| n.value.is_finite() && !n.diverged));
        assert!(tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.4, 3.0).is_err());
        assert!(tail_weighted_norm_diagnostic(&psi, &s.scheme, 0.2, 1.0).is_err());
        let empty = build_partition(7.9, 3.0, 4, HurstParam::new(0.7).unwrap()).unwrap();
        assert!(matches!(
            tail_weighted_norm_diagnostic(&psi, &empty, 0.4, 1.0),
            Err(Error::Parameter(_))
        ));
    }
}

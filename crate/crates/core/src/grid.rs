//! Time grids on `[0, 1]` with a dual representation near the right end.
//!
//! Points of the representation construction cluster exponentially at `t = 1`
//! (`1 - t_n = exp(-kappa^(n/a))`). Every point therefore carries both `t` and
//! its tail `q = 1 - t`; lags between points close to 1 are taken from the
//! tails, never from differences of nearly equal `t` values. The log gap
//! `u = -ln(1 - t)` is derived from the tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time in `[0, 1]` together with its distance to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub t: f64,
    pub tail: f64,
}

impl GridPoint {
    pub fn from_t(t: f64) -> Self {
        GridPoint { t, tail: 1.0 - t }
    }

    pub fn from_tail(tail: f64) -> Self {
        GridPoint { t: 1.0 - tail, tail }
    }

    pub fn from_log_gap(u: f64) -> Self {
        if u.is_infinite() {
            return GridPoint { t: 1.0, tail: 0.0 };
        }
        GridPoint {
            t: -(-u).exp_m1(),
            tail: (-u).exp(),
        }
    }

    /// `u = -ln(1 - t)`; infinite at `t = 1`.
    pub fn log_gap(&self) -> f64 {
        if self.t < 0.5 {
            -(-self.t).ln_1p()
        } else {
            -self.tail.ln()
        }
    }

    /// Signed lag `later - self`, computed in whichever representation is exact.
    #[inline]
    pub fn lag_to(&self, later: &GridPoint) -> f64 {
        if self.t >= 0.5 && later.t >= 0.5 {
            self.tail - later.tail
        } else {
            later.t - self.t
        }
    }

    /// The point a fraction `theta` of the way from `self` to `other`.
    pub fn lerp(&self, other: &GridPoint, theta: f64) -> GridPoint {
        let lag = self.lag_to(other);
        if self.t >= 0.5 {
            GridPoint::from_tail(self.tail - theta * lag)
        } else {
            let t = self.t + theta * lag;
            if t >= 0.5 {
                GridPoint::from_tail(other.tail + (1.0 - theta) * lag)
            } else {
                GridPoint::from_t(t)
            }
        }
    }
}

/// A strictly increasing set of times in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<GridPoint>,
}

/// Serialized form: times plus log gaps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeGridRecord {
    pub times: Vec<f64>,
    pub log_gaps: Vec<f64>,
}

impl TimeGrid {
    pub fn from_points(points: Vec<GridPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("time grid must contain at least one point"));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.t) || !(0.0..=1.0).contains(&p.tail) {
                return Err(Error::domain(format!("grid time {} outside [0, 1]", p.t)));
            }
        }
        for w in points.windows(2) {
            if !(w[0].lag_to(&w[1]) > 0.0) {
                return Err(Error::domain(format!(
                    "grid times must be strictly increasing ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    pub fn from_times(times: &[f64]) -> Result<Self> {
        Self::from_points(times.iter().map(|&t| GridPoint::from_t(t)).collect())
    }

    /// Grid from tails `1 - t`, given in decreasing order.
    pub fn from_tails(tails: &[f64]) -> Result<Self> {
        Self::from_points(tails.iter().map(|&q| GridPoint::from_tail(q)).collect())
    }

    /// `cells + 1` equally spaced points on `[a, b]`.
    pub fn uniform(cells: usize, a: f64, b: f64) -> Result<Self> {
        if cells == 0 || !(a < b) {
            return Err(Error::domain("uniform grid needs at least one cell and a < b"));
        }
        let h = (b - a) / cells as f64;
        let times: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { b } else { a + h * i as f64 })
            .collect();
        Self::from_times(&times)
    }

    /// Merges several point sets, dropping points closer than `rel_tol`
    /// (relative to the local tail or time) to an already kept point.
    pub fn merged(mut points: Vec<GridPoint>, rel_tol: f64) -> Result<Self> {
        points.sort_by(|a, b| b.tail.partial_cmp(&a.tail).unwrap_or(std::cmp::Ordering::Equal));
        let mut kept: Vec<GridPoint> = Vec::with_capacity(points.len());
        for p in points {
            if let Some(last) = kept.last() {
                let lag = last.lag_to(&p);
                let scale = last.t.min(last.tail).max(f64::MIN_POSITIVE);
                if lag <= rel_tol * scale {
                    continue;
                }
            }
            kept.push(p);
        }
        Self::from_points(kept)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> GridPoint {
        self.points[i]
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn log_gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.log_gap()).collect()
    }

    pub fn first(&self) -> GridPoint {
        self.points[0]
    }

    pub fn last(&self) -> GridPoint {
        self.points[self.points.len() - 1]
    }

    /// Lags between consecutive points.
    pub fn steps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[0].lag_to(&w[1])).collect()
    }

    /// Smallest step measured in log-gap units, `(t_{i+1} - t_i) / (1 - t_i)`.
    pub fn min_relative_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].lag_to(&w[1]) / w[0].tail.max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when consecutive steps agree to `rel_tol`.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let steps = self.steps();
        match steps.first() {
            None => true,
            Some(&h0) => steps.iter().all(|h| (h - h0).abs() <= rel_tol * h0),
        }
    }

    /// Index of the point equal to `t` (within `tol`), if any.
    pub fn index_of(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.points.partition_point(|p| p.t < t - tol);
        (i < self.points.len() && (self.points[i].t - t).abs() <= tol).then_some(i)
    }

    /// Every `stride`-th point, always keeping the last one.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let n = self.points.len();
        let mut pts: Vec<GridPoint> = self.points.iter().step_by(stride).copied().collect();
        if !(n - 1).is_multiple_of(stride) {
            pts.push(self.points[n - 1]);
        }
        Self::from_points(pts)
    }

    pub fn to_record(&self) -> TimeGridRecord {
        TimeGridRecord {
            times: self.times(),
            log_gaps: self.log_gaps(),
        }
    }

    /// Rebuilds a grid from its record, taking tails from the log gaps for
    /// points in the right half (where they carry the precision).
    pub fn from_record(rec: &TimeGridRecord) -> Result<Self> {
        if rec.times.len() != rec.log_gaps.len() {
            return Err(Error::Format("times and log_gaps differ in length".into()));
        }
        let pts = rec
            .times
            .iter()
            .zip(&rec.log_gaps)
            .map(|(&t, &u)| {
                if t >= 0.5 {
                    GridPoint::from_log_gap(u)
                } else {
                    GridPoint::from_t(t)
                }
            })
            .collect();
        Self::from_points(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_representation_is_consistent() {
        let tails: Vec<f64> = (0..40).map(|k| (-(k as f64) * 0.9).exp()).collect();
        let grid = TimeGrid::from_tails(&tails).unwrap();
        for p in grid.points() {
            let back = GridPoint::from_log_gap(p.log_gap());
            assert!((back.t - p.t).abs() <= 1e-12 * p.t.max(1e-300) + 1e-300);
            assert!((back.tail - p.tail).abs() <= 1e-12 * p.tail);
        }
    }

    #[test]
    fn lags_near_one_come_from_tails() {
        let a = GridPoint::from_tail(1e-13);
        let b = GridPoint::from_tail(4e-14);
        assert!((a.lag_to(&b) - 6e-14).abs() < 1e-28);
    }

    #[test]
    fn rejects_non_increasing_times() {
        assert!(TimeGrid::from_times(&[0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_times(&[0.0, 1.2]).is_err());
    }

    #[test]
    fn merged_drops_duplicates() {
        let pts = vec![
            GridPoint::from_t(0.0),
            GridPoint::from_t(0.5),
            GridPoint::from_tail(0.5),
            GridPoint::from_t(0.25),
        ];
        let g = TimeGrid::merged(pts, 1e-12).unwrap();
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn lerp_stays_inside_cell() {
        let a = GridPoint::from_tail(1e-9);
        let b = GridPoint::from_tail(1e-10);
        let m = a.lerp(&b, 0.5);
        assert!((m.tail - 5.5e-10).abs() < 1e-24);
        let c = GridPoint::from_t(0.1).lerp(&GridPoint::from_t(0.3), 0.25);
        assert!((c.t - 0.15).abs() < 1e-15);
    }

    #[test]
    fn uniform_and_subsample() {
        let g = TimeGrid::uniform(16, 0.0, 1.0).unwrap();
        assert!(g.is_uniform(1e-9));
        let s = g.subsample(4).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.last().t, 1.0);
    }
}

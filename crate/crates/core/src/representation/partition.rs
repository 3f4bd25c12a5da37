use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::HurstParam;
use crate::grid::{GridPoint, TimeGrid};

/// Smallest admissible lag between construction points.
pub const DEFAULT_LAG_FLOOR: f64 = 1e-12;

/// One level `[t_n, t_{n+1}]` of the partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub t: f64,
    /// `1 - t_n`.
    pub tail: f64,
    /// `Delta_n = t_{n+1} - t_n`.
    pub width: f64,
    /// `delta_n = Delta_n / n`.
    pub mesh: f64,
    /// `a_n = 2^{-n+3} delta_n^{-2H} / n`.
    pub coefficient: f64,
}

impl Level {
    pub fn start(&self) -> GridPoint {
        GridPoint::from_tail(self.tail)
    }

    pub fn end(&self) -> GridPoint {
        GridPoint::from_tail(self.tail - self.width)
    }

    /// `s_{n,k} = t_n + k delta_n`.
    pub fn sub_point(&self, k: usize) -> GridPoint {
        if k == self.n {
            self.end()
        } else {
            GridPoint::from_tail(self.tail - k as f64 * self.mesh)
        }
    }
}

/// Geometry of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub kappa: f64,
    pub a: f64,
    pub n_max: usize,
    pub hurst: HurstParam,
    /// Levels `1..=n_max`.
    pub levels: Vec<Level>,
    /// `max_n (1 - t_n) / Delta_n`.
    pub max_tail_ratio: f64,
}

fn tail_at(kappa: f64, a: f64, n: f64) -> f64 {
    (-kappa.powf(n / a)).exp()
}

/// Validates `2 < kappa < 2^a`, `a > 1`, `n_max >= 2` and tabulates levels.
pub fn build_partition(kappa: f64, a: f64, n_max: usize, hurst: HurstParam) -> Result<PartitionScheme> {
    build_partition_with_floor(kappa, a, n_max, hurst, DEFAULT_LAG_FLOOR)
}

pub fn build_partition_with_floor(
    kappa: f64,
    a: f64,
    n_max: usize,
    hurst: HurstParam,
    lag_floor: f64,
) -> Result<PartitionScheme> {
    if !(a > 1.0) {
        return Err(Error::parameter(format!("a = {a} must exceed 1")));
    }
    let upper = 2f64.powf(a);
    if !(kappa > 2.0 && kappa < upper) {
        return Err(Error::parameter(format!(
            "kappa = {kappa} violates kappa in (2, 2^a) = (2, {upper})"
        )));
    }
    if n_max < 2 {
        return Err(Error::parameter(format!("n_max = {n_max} must be at least 2")));
    }
    hurst.require_long_memory()?;
    let p = hurst.two_h();
    let mut levels = Vec::with_capacity(n_max);
    let mut max_ratio: f64 = 0.0;
    for n in 1..=n_max {
        let q = tail_at(kappa, a, n as f64);
        let q_next = tail_at(kappa, a, (n + 1) as f64);
        let width = q - q_next;
        let mesh = width / n as f64;
        if !(mesh >= lag_floor) || q_next <= 0.0 {
            return Err(Error::resolution(format!(
                "level {n} mesh {mesh:e} is below the lag floor {lag_floor:e}; reduce n_max"
            )));
        }
        max_ratio = max_ratio.max(q / width);
        levels.push(Level {
            n,
            t: 1.0 - q,
            tail: q,
            width,
            mesh,
            coefficient: 2f64.powi(3 - n as i32) * mesh.powf(-p) / n as f64,
        });
    }
    Ok(PartitionScheme {
        kappa,
        a,
        n_max,
        hurst,
        levels,
        max_tail_ratio: max_ratio,
    })
}

/// Open window `(1/2, a ln 2 / ln kappa - 1/2)` for the weight exponent `mu`.
pub fn mu_window(kappa: f64, a: f64) -> Result<(f64, f64)> {
    let hi = a * 2f64.ln() / kappa.ln() - 0.5;
    if hi <= 0.5 {
        return Err(Error::parameter(format!(
            "the mu window (1/2, {hi}) is empty for kappa = {kappa}, a = {a}"
        )));
    }
    Ok((0.5, hi))
}

impl PartitionScheme {
    pub fn level(&self, n: usize) -> &Level {
        &self.levels[n - 1]
    }

    /// `t_0 = 1 - e^{-1}`, where the first target value `xi_0` is read.
    pub fn t0(&self) -> GridPoint {
        GridPoint::from_tail((-1.0f64).exp())
    }

    pub fn mu_window(&self) -> Result<(f64, f64)> {
        mu_window(self.kappa, self.a)
    }
}

/// Construction grid with index tables for every level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionGrid {
    pub grid: TimeGrid,
    pub index_t0: usize,
    pub index_one: usize,
    /// `sub_points[n - 1][k]` is the index of `s_{n,k}`.
    pub sub_points: Vec<Vec<usize>>,
    /// `fine[n - 1][k]` lists the `r + 1` indices checked inside sub-block
    /// `[s_{n,k}, s_{n,k+1}]`.
    pub fine: Vec<Vec<Vec<usize>>>,
    /// `reserve[n - 1][m - 1]` lists the `J + 1` indices of block `m`.
    pub reserve: Vec<Vec<Vec<usize>>>,
    pub layout: GridLayout,
}

/// Extra points of the construction grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    /// Case 1 reserve blocks per level.
    pub reserve_depth: usize,
    /// Pieces per reserve block.
    pub reserve_split: usize,
    /// Stopping checks per Case 2 sub-block.
    pub case2_refine: usize,
}

impl Default for GridLayout {
    fn default() -> Self {
        GridLayout {
            reserve_depth: 20,
            reserve_split: 4,
            case2_refine: 16,
        }
    }
}

/// Reserve block `m` of a level covers
/// `[t_n + Delta_n (1 - 2^{1-m}), t_n + Delta_n (1 - 2^{-m})]`.
fn reserve_points(level: &Level, depth: usize, split: usize) -> Vec<Vec<GridPoint>> {
    let mut blocks = Vec::with_capacity(depth);
    for m in 1..=depth {
        let start = 1.0 - 2f64.powi(1 - m as i32);
        let len = 2f64.powi(-(m as i32));
        let pts = (0..=split)
            .map(|j| {
                let frac = start + len * j as f64 / split as f64;
                GridPoint::from_tail(level.tail - level.width * frac)
            })
            .collect();
        blocks.push(pts);
    }
    blocks
}

fn fine_points(level: &Level, refine: usize) -> Vec<Vec<GridPoint>> {
    (0..level.n)
        .map(|k| {
            (0..=refine)
                .map(|j| {
                    if j == refine {
                        level.sub_point(k + 1)
                    } else {
                        GridPoint::from_tail(level.tail - level.mesh * (k as f64 + j as f64 / refine as f64))
                    }
                })
                .collect()
        })
        .collect()
}

/// `{0, t_0, s_{n,k}, 1}`, `r - 1` stopping checks inside each sub-block and
/// `depth * split` reserve points per level for the Case 1 blocks.
pub fn construction_grid(scheme: &PartitionScheme, layout: GridLayout) -> Result<ConstructionGrid> {
    let GridLayout {
        reserve_depth: depth,
        reserve_split: split,
        case2_refine: refine,
    } = layout;
    if depth == 0 || split == 0 || refine == 0 {
        return Err(Error::parameter("reserve depth, split and refinement must be positive"));
    }
    let mut pts = vec![GridPoint::from_t(0.0), scheme.t0(), GridPoint::from_t(1.0)];
    for lv in &scheme.levels {
        pts.extend((0..=lv.n).map(|k| lv.sub_point(k)));
        for block in fine_points(lv, refine) {
            pts.extend(block);
        }
        for block in reserve_points(lv, depth, split) {
            pts.extend(block);
        }
    }
    let grid = TimeGrid::merged(pts, 1e-13)?;
    let find = |p: &GridPoint| -> Result<usize> {
        let ps = grid.points();
        let i = ps.partition_point(|q| q.tail > p.tail);
        let mut best = None;
        for j in [i.saturating_sub(1), i, i + 1] {
            if j < ps.len() {
                let d = (ps[j].tail - p.tail).abs();
                if d <= 1e-12 * p.tail.max(p.t).max(1e-300) && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
            .ok_or_else(|| Error::resolution(format!("construction point {} lost in merging", p.t)))
    };
    let locate = |blocks: Vec<Vec<GridPoint>>, n: usize| -> Result<Vec<Vec<usize>>> {
        let blocks = blocks
            .iter()
            .map(|b| b.iter().map(&find).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        if blocks.iter().any(|b| b.windows(2).any(|w| w[1] <= w[0])) {
            return Err(Error::resolution(format!("construction points of level {n} collapse")));
        }
        Ok(blocks)
    };
    let mut sub_points = Vec::new();
    let mut fine = Vec::new();
    let mut reserve = Vec::new();
    for lv in &scheme.levels {
        sub_points.push((0..=lv.n).map(|k| find(&lv.sub_point(k))).collect::<Result<Vec<_>>>()?);
        fine.push(locate(fine_points(lv, refine), lv.n)?);
        reserve.push(locate(reserve_points(lv, depth, split), lv.n)?);
    }
    Ok(ConstructionGrid {
        index_t0: find(&scheme.t0())?,
        index_one: grid.len() - 1,
        grid,
        sub_points,
        fine,
        reserve,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> HurstParam {
        HurstParam::new(0.7).unwrap()
    }

    #[test]
    fn first_point_and_ratio() {
        let s = build_partition(3.0, 2.0, 4, h()).unwrap();
        assert!((s.levels[0].t - 0.823_078_793_682_235_8).abs() < 1e-15);
        let s = build_partition(2.2, 3.0, 10, h()).unwrap();
        assert!(s.max_tail_ratio <= 10.0, "{}", s.max_tail_ratio);
        assert!(s.levels.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(build_partition(2.0, 1.0, 4, h()), Err(Error::Parameter(_))));
        assert!(matches!(build_partition(5.0, 2.0, 4, h()), Err(Error::Parameter(_))));
        assert!(matches!(build_partition(2.2, 3.0, 1, h()), Err(Error::Parameter(_))));
        assert!(matches!(build_partition(2.2, 3.0, 14, h()), Err(Error::Resolution(_))));
    }

    #[test]
    fn mu_window_value() {
        let (lo, hi) = mu_window(2.2, 3.0).unwrap();
        assert_eq!(lo, 0.5);
        assert!((hi - 2.137_354_467_360_323).abs() < 1e-12);
        assert!(mu_window(8.5, 3.0).is_err());
        let (_, narrow) = mu_window(7.9, 3.0).unwrap();
        assert!(narrow < 0.51);
    }

    #[test]
    fn grid_contains_sub_points() {
        let s = build_partition(2.2, 3.0, 2, h()).unwrap();
        let g = construction_grid(
            &s,
            GridLayout {
                reserve_depth: 2,
                reserve_split: 2,
                case2_refine: 2,
            },
        )
        .unwrap();
        let lv1 = s.level(1);
        let lv2 = s.level(2);
        for p in [lv1.start(), lv1.end(), lv2.sub_point(1), lv2.end()] {
            assert!(g.grid.points().iter().any(|q| (q.tail - p.tail).abs() <= 1e-15 * p.tail));
        }
        assert_eq!(g.sub_points[1][0], g.sub_points[0][1]);
        assert_eq!(g.grid.point(0).t, 0.0);
        assert_eq!(g.grid.last().tail, 0.0);
    }

    #[test]
    fn grid_size_counts_points() {
        let s = build_partition(2.2, 3.0, 10, h()).unwrap();
        let bare = construction_grid(
            &s,
            GridLayout {
                reserve_depth: 1,
                reserve_split: 1,
                case2_refine: 1,
            },
        )
        .unwrap();
        // 0, t_0, 1, t_1 and n new sub-points per level; the depth-1 single-split reserve
        // block [t_n, t_n + Delta_n / 2] adds one midpoint per level, which is a
        // sub-point on even levels
        let odd_levels = (1..=10).filter(|n| n % 2 == 1).count();
        assert_eq!(bare.grid.len(), 4 + 55 + odd_levels);
        let g = construction_grid(&s, GridLayout::default()).unwrap();
        assert_eq!(g.fine[9][3][0], g.sub_points[9][3]);
        assert_eq!(g.fine[9][3][16], g.sub_points[9][4]);
        let min_lag = g.grid.steps().into_iter().fold(f64::INFINITY, f64::min);
        let last = s.level(10);
        assert!(min_lag <= last.mesh);
        assert!(min_lag > 0.0);
    }
}

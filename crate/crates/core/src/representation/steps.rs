use serde::{Deserialize, Serialize};

use super::causal::CausalView;
use super::partition::{ConstructionGrid, PartitionScheme};

/// Which step built a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Divergent integrand stopped when the gap is closed.
    One,
    /// `a_n`-scaled quadratic variation stopped when the gap is closed.
    Two,
}

/// Outcome of a stopped block sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRun {
    /// Blocks consumed before stopping.
    pub used: usize,
    pub sum: f64,
    pub exhausted: bool,
    pub max_term: f64,
}

/// Result of a level step: the stopped sum, the grid index where the
/// integrand was switched off, and the active blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub run: BlockRun,
    pub stop_index: usize,
    pub blocks: Vec<StepBlock>,
}

impl BlockRun {
    pub fn overshoot(&self, gap: f64) -> f64 {
        (self.sum - gap.abs()).abs()
    }
}

/// Adds `term(0), term(1), ...` until the sum reaches `|gap|`. A zero gap
/// stops before the first block.
pub fn run_blocks(count: usize, gap: f64, mut term: impl FnMut(usize) -> f64) -> BlockRun {
    let target = gap.abs();
    let mut run = BlockRun {
        used: 0,
        sum: 0.0,
        exhausted: false,
        max_term: 0.0,
    };
    if target == 0.0 {
        return run;
    }
    for k in 0..count {
        let v = term(k);
        run.sum += v;
        run.max_term = run.max_term.max(v);
        run.used = k + 1;
        if run.sum >= target {
            return run;
        }
    }
    run.exhausted = true;
    run
}

/// An active block of the step integrand: on `[start, end)` the integrand is
/// `coefficient * (B(t) - B(start))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBlock {
    pub level: usize,
    pub case: Case,
    pub start: usize,
    pub end: usize,
    pub coefficient: f64,
}

/// Case 2 on level `n`. Sub-block `[s_{n,k}, s_{n,k+1}]` adds
/// `a_n (B(t) - B(s_{n,k}))^2` to the running integral, which is checked at
/// the `r` refinement points of the sub-block; the integrand switches off at
/// the first check where the running integral reaches `|gap|`.
pub fn case2_step(
    view: &mut CausalView<'_>,
    scheme: &PartitionScheme,
    cg: &ConstructionGrid,
    n: usize,
    gap: f64,
) -> StepOutcome {
    let an = scheme.level(n).coefficient;
    let target = gap.abs();
    let coefficient = 2.0 * gap.signum() * an;
    let block = |start: usize, end: usize| StepBlock {
        level: n,
        case: Case::Two,
        start,
        end,
        coefficient,
    };
    let mut run = BlockRun {
        used: 0,
        sum: 0.0,
        exhausted: false,
        max_term: 0.0,
    };
    let mut blocks = Vec::new();
    if target == 0.0 {
        return StepOutcome {
            run,
            stop_index: cg.sub_points[n - 1][0],
            blocks,
        };
    }
    let mut completed = 0.0;
    for (k, pts) in cg.fine[n - 1].iter().enumerate() {
        view.advance(pts[0]);
        let base = view.read(pts[0]);
        run.used = k + 1;
        let last = pts.len() - 1;
        for j in 1..=last {
            view.advance(pts[j]);
            let x = view.read(pts[j]) - base;
            let term = an * x * x;
            run.max_term = run.max_term.max(term);
            if completed + term >= target {
                run.sum = completed + term;
                blocks.push(block(pts[0], pts[j]));
                return StepOutcome {
                    run,
                    stop_index: pts[j],
                    blocks,
                };
            }
            if j == last {
                completed += term;
            }
        }
        blocks.push(block(pts[0], pts[last]));
    }
    run.sum = completed;
    run.exhausted = true;
    StepOutcome {
        run,
        stop_index: cg.sub_points[n - 1][n],
        blocks,
    }
}

/// `c_{n,m} = |gap| / (2 J (l_m / J)^{2H})`, so every reserve block adds
/// `|gap| / 2` in mean.
pub fn case1_coefficient(gap: f64, block_len: f64, split: usize, two_h: f64) -> f64 {
    gap.abs() / (2.0 * split as f64 * (block_len / split as f64).powf(two_h))
}

/// Case 1 on level `n`: reserve blocks of length `Delta_n 2^{-m}` split into
/// `J` pieces, each piece adding `c_{n,m} (Delta B)^2`.
pub fn case1_step(
    view: &mut CausalView<'_>,
    scheme: &PartitionScheme,
    cg: &ConstructionGrid,
    n: usize,
    gap: f64,
) -> StepOutcome {
    let lv = scheme.level(n);
    let j = cg.layout.reserve_split;
    let blocks_idx = &cg.reserve[n - 1];
    let two_h = scheme.hurst.two_h();
    let coef = |m: usize| case1_coefficient(gap, lv.width * 2f64.powi(-(m as i32 + 1)), j, two_h);
    let run = run_blocks(cg.layout.reserve_depth * j, gap, |b| {
        let (m, i) = (b / j, b % j);
        let pts = &blocks_idx[m];
        view.advance(pts[i + 1]);
        coef(m) * (view.read(pts[i + 1]) - view.read(pts[i])).powi(2)
    });
    let sign = gap.signum();
    let blocks: Vec<StepBlock> = (0..run.used)
        .map(|b| {
            let (m, i) = (b / j, b % j);
            StepBlock {
                level: n,
                case: Case::One,
                start: blocks_idx[m][i],
                end: blocks_idx[m][i + 1],
                coefficient: 2.0 * sign * coef(m),
            }
        })
        .collect();
    let stop_index = blocks.last().map_or(cg.sub_points[n - 1][0], |b| b.end);
    StepOutcome {
        run,
        stop_index,
        blocks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::HurstParam;
    use crate::representation::partition::{build_partition, construction_grid, GridLayout};

    #[test]
    fn stops_after_two_blocks() {
        let r = run_blocks(5, 0.5, |_| 0.3);
        assert_eq!(r.used, 2);
        assert!(!r.exhausted);
        assert!((r.overshoot(0.5) - 0.1).abs() < 1e-12);
        assert!(r.overshoot(0.5) <= r.max_term);
        let r = run_blocks(5, -0.5, |_| 0.3);
        assert_eq!(r.used, 2);
    }

    #[test]
    fn zero_gap_and_exhaustion() {
        let r = run_blocks(3, 0.0, |_| panic!("no block may be read"));
        assert_eq!((r.used, r.sum, r.exhausted), (0, 0.0, false));
        let r = run_blocks(3, 10.0, |_| 1.0);
        assert!(r.exhausted);
        assert_eq!(r.used, 3);
    }

    #[test]
    fn case2_on_linear_path() {
        let h = HurstParam::new(0.7).unwrap();
        let s = build_partition(2.2, 3.0, 3, h).unwrap();
        let cg = construction_grid(&s, GridLayout::default()).unwrap();
        // B(t) = t: a full sub-block adds a_n delta_n^2, the third one is
        // stopped at the check 12/16 where (6/8)^2 >= 1/2
        let b: Vec<f64> = cg.grid.times();
        let lv = *s.level(3);
        let term = lv.coefficient * lv.mesh * lv.mesh;
        let mut view = CausalView::new(&b);
        view.advance(cg.sub_points[2][0]);
        let out = case2_step(&mut view, &s, &cg, 3, -2.5 * term);
        assert_eq!(out.run.used, 3);
        assert!((out.run.sum - 2.5625 * term).abs() < 1e-9 * term);
        assert!((out.run.overshoot(2.5 * term) - 0.0625 * term).abs() < 1e-9 * term);
        assert_eq!(out.blocks.len(), 3);
        assert_eq!(out.stop_index, cg.fine[2][2][12]);
        assert!(out.blocks.iter().all(|b| b.coefficient == -2.0 * lv.coefficient));
        assert!(view.audit().ok());
        let out = case2_step(&mut view, &s, &cg, 3, 0.0);
        assert!(out.blocks.is_empty());
    }

    #[test]
    fn case1_on_equal_increments() {
        let h = HurstParam::new(0.7).unwrap();
        let s = build_partition(2.2, 3.0, 3, h).unwrap();
        let cg = construction_grid(&s, GridLayout::default()).unwrap();
        let n = 2;
        // every reserve piece has increment 1, so piece (m, i) adds
        // gap / (2 J (l_m / J)^{2H})
        let mut b = vec![0.0; cg.grid.len()];
        let mut acc = 0.0;
        for block in &cg.reserve[n - 1] {
            for w in block.windows(2) {
                acc += 1.0;
                b[w[1]] = acc;
            }
        }
        let gap = 0.5;
        let lv = *s.level(n);
        let mut expected = 0.0;
        let mut used = 0;
        'outer: for m in 1..=20 {
            let c = case1_coefficient(gap, lv.width * 2f64.powi(-m), 4, 1.4);
            for _ in 0..4 {
                expected += c;
                used += 1;
                if expected >= gap {
                    break 'outer;
                }
            }
        }
        let mut view = CausalView::new(&b);
        view.advance(cg.sub_points[n - 1][0]);
        let out = case1_step(&mut view, &s, &cg, n, gap);
        assert_eq!(out.run.used, used);
        assert!((out.run.sum - expected).abs() < 1e-12 * expected);
        assert!(view.audit().ok());
    }
}

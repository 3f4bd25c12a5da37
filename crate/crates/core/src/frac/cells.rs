use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{GridPoint, TimeGrid};

use super::{Interpolation, SampledFunction};

/// A piecewise linear function on `[nodes[0], nodes[K]]` with possible jumps
/// at the nodes. On cell `i` it equals `start[i] + slope[i] * (x - nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    nodes: Vec<GridPoint>,
    start: Vec<f64>,
    slope: Vec<f64>,
}

impl CellFunction {
    pub fn new(nodes: Vec<GridPoint>, start: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || start.len() + 1 != nodes.len() || slope.len() != start.len() {
            return Err(Error::domain("cell function needs K + 1 nodes and K cells"));
        }
        TimeGrid::from_points(nodes.clone())?;
        Ok(CellFunction { nodes, start, slope })
    }

    pub fn from_sampled(f: &SampledFunction) -> Self {
        let nodes = f.grid().points().to_vec();
        let v = f.values();
        let k = nodes.len() - 1;
        let start = v[..k].to_vec();
        let slope = match f.interpolation() {
            Interpolation::PiecewiseConstantLeft => vec![0.0; k],
            Interpolation::PiecewiseLinear => (0..k)
                .map(|i| (v[i + 1] - v[i]) / nodes[i].lag_to(&nodes[i + 1]))
                .collect(),
        };
        CellFunction { nodes, start, slope }
    }

    pub fn nodes(&self) -> &[GridPoint] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn left_end(&self) -> GridPoint {
        self.nodes[0]
    }

    pub fn right_end(&self) -> GridPoint {
        self.nodes[self.nodes.len() - 1]
    }

    /// Value approached from the left at the end of cell `i`.
    pub fn end_of_cell(&self, i: usize) -> f64 {
        self.start[i] + self.slope[i] * self.nodes[i].lag_to(&self.nodes[i + 1])
    }

    /// `f(b-)` at the right end.
    pub fn right_limit(&self) -> f64 {
        self.end_of_cell(self.cells() - 1)
    }

    /// Jump at node `j` (`j = 0` jumps from zero to `f(a+)`).
    pub fn jump(&self, j: usize) -> f64 {
        if j == 0 {
            self.start[0]
        } else if j < self.cells() {
            self.start[j] - self.end_of_cell(j - 1)
        } else {
            0.0
        }
    }

    /// Index of the cell containing `x` (the last cell for the right end).
    pub fn cell_of(&self, x: &GridPoint) -> usize {
        let i = self.nodes.partition_point(|p| p.lag_to(x) >= 0.0);
        i.clamp(1, self.cells()) - 1
    }

    /// Right-continuous value at `x`.
    pub fn eval(&self, x: &GridPoint) -> f64 {
        let i = self.cell_of(x);
        self.start[i] + self.slope[i] * self.nodes[i].lag_to(x)
    }

    pub fn eval_t(&self, t: f64) -> f64 {
        self.eval(&GridPoint::from_t(t))
    }

    /// The function on `[a, b]`, a sub-interval of the domain.
    pub fn restrict(&self, a: &GridPoint, b: &GridPoint) -> Result<CellFunction> {
        let lo = self.left_end();
        let hi = self.right_end();
        if lo.lag_to(a) < 0.0 || b.lag_to(&hi) < 0.0 || !(a.lag_to(b) > 0.0) {
            return Err(Error::domain("restriction interval must be a non-empty sub-interval"));
        }
        let mut nodes = vec![*a];
        let mut start = vec![self.eval(a)];
        let mut slope = vec![self.slope[self.cell_of(a)]];
        for (j, p) in self.nodes.iter().enumerate() {
            if a.lag_to(p) > 0.0 && p.lag_to(b) > 0.0 {
                nodes.push(*p);
                start.push(self.start[j]);
                slope.push(self.slope[j]);
            }
        }
        nodes.push(*b);
        Ok(CellFunction { nodes, start, slope })
    }

    /// Left Weyl-Marchaud derivative `D^alpha_{a+} f(x)` with `a` the left
    /// end, summed exactly over the jumps and slope changes below `x`.
    pub fn left_derivative(&self, alpha: f64, x: &GridPoint) -> f64 {
        let one_minus = 1.0 - alpha;
        let mut acc = 0.0;
        let mut prev_slope = 0.0;
        for j in 0..self.cells() {
            let d = self.nodes[j].lag_to(x);
            if !(d > 0.0) {
                break;
            }
            let jump = self.jump(j);
            let kink = self.slope[j] - prev_slope;
            prev_slope = self.slope[j];
            let dm = d.powf(-alpha);
            acc += jump * dm + kink * d * dm / one_minus;
        }
        acc / gamma(one_minus)
    }

    /// Right derivative `D^beta_{b-} f_{b-}(x)` of `f_{b-} = f - f(b-)`, with
    /// `b` the right end.
    pub fn right_derivative(&self, beta: f64, x: &GridPoint) -> f64 {
        let one_minus = 1.0 - beta;
        let k = self.cells();
        let mut acc = 0.0;
        for j in (1..=k).rev() {
            let d = x.lag_to(&self.nodes[j]);
            if !(d > 0.0) {
                break;
            }
            let next_slope = if j < k { self.slope[j] } else { 0.0 };
            let jump = if j < k { self.jump(j) } else { 0.0 };
            let dm = d.powf(-beta);
            acc += (self.slope[j - 1] - next_slope) * d * dm / one_minus + jump * dm;
        }
        -acc / gamma(one_minus)
    }

    /// `I^alpha_{a+}` of the function itself, exact for the cell form.
    pub fn left_integral(&self, alpha: f64, x: &GridPoint) -> f64 {
        // antiderivative form: jumps give (x-u)^alpha / Gamma(alpha+1), kinks (x-u)^{alpha+1}/Gamma(alpha+2)
        let mut acc_j = 0.0;
        let mut acc_k = 0.0;
        let mut prev_slope = 0.0;
        for j in 0..self.cells() {
            let d = self.nodes[j].lag_to(x);
            if !(d > 0.0) {
                break;
            }
            let da = d.powf(alpha);
            acc_j += self.jump(j) * da;
            acc_k += (self.slope[j] - prev_slope) * d * da;
            prev_slope = self.slope[j];
        }
        acc_j / gamma(alpha + 1.0) + acc_k / gamma(alpha + 2.0)
    }
}

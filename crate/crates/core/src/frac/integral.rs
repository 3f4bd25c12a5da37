use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{GridPoint, TimeGrid};

use super::cells::CellFunction;
use super::quadrature::{merge_points, panels_between, Panel};
use super::{FracOrder, Interpolation, LogWeight, SampledFunction};

/// A refined numerical value with the size of its last correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// Refinement level at which the estimate was accepted.
    pub depth: u32,
}

/// Tolerances and limits shared by the quadrature drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegralOptions {
    /// Successive refinements must agree to `tol * max(1, |value|)`.
    pub tol: f64,
    pub max_depth: u32,
    /// First dyadic level tried by the function-based drivers.
    pub start_depth: u32,
    /// Panel caps: length in `x` on `[0, 1/2)`, in log gap on `[1/2, 1)`.
    pub max_dx: f64,
    pub max_du: f64,
    /// Extra log-gap range integrated past the last finite node before 1.
    pub u_tail: f64,
    /// Verify the weighted norm of `D^alpha f` before integrating.
    pub check_admissibility: bool,
    /// Verify `lambda + alpha > 1` for the integrator (`lambda` fitted
    /// when not given).
    pub check_regularity: bool,
    pub lambda: Option<f64>,
    pub nu: f64,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions {
            tol: 1e-6,
            max_depth: 16,
            start_depth: 4,
            max_dx: 1.0 / 16.0,
            max_du: 0.5,
            u_tail: 36.0,
            check_admissibility: true,
            check_regularity: true,
            lambda: None,
            nu: 0.0,
        }
    }
}

fn point_in(t: f64) -> Result<GridPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("time {t} outside [0, 1]")));
    }
    Ok(GridPoint::from_t(t))
}

/// `D^alpha_{a+} f(x)` for a sampled function (exact for its interpolant).
pub fn rl_derivative_left(f: &SampledFunction, alpha: FracOrder, a: f64, x: f64) -> Result<f64> {
    if x < a {
        return Err(Error::domain(format!("x = {x} is left of a = {a}")));
    }
    let cells = f.cells();
    let (pa, px) = (point_in(a)?, point_in(x)?);
    let r = cells.restrict(&pa, &cells.right_end())?;
    Ok(r.left_derivative(alpha.value(), &px))
}

/// `D^beta_{b-} g_{b-}(x)` for a sampled function, real convention.
pub fn rl_derivative_right(g: &SampledFunction, beta: FracOrder, b: f64, x: f64) -> Result<f64> {
    if x > b {
        return Err(Error::domain(format!("x = {x} is right of b = {b}")));
    }
    let cells = g.cells();
    let (pb, px) = (point_in(b)?, point_in(x)?);
    let r = cells.restrict(&cells.left_end(), &pb)?;
    Ok(r.right_derivative(beta.value(), &px))
}

fn refine_dyadic(opts: &IntegralOptions, mut level: impl FnMut(u32) -> Result<f64>, what: &str) -> Result<IntegralEstimate> {
    let mut prev = level(opts.start_depth)?;
    for d in opts.start_depth + 1..=opts.max_depth {
        let cur = level(d)?;
        let diff = (cur - prev).abs();
        if diff <= opts.tol * cur.abs().max(1.0) {
            return Ok(IntegralEstimate {
                value: cur,
                error_estimate: diff,
                depth: d,
            });
        }
        prev = cur;
    }
    Err(Error::Nonconvergence(format!(
        "{what} did not stabilize to {} within depth {}",
        opts.tol, opts.max_depth
    )))
}

/// `D^alpha_{a+} f(x)` for a function given in closed form, sampled on
/// dyadic grids of `[a, x]` until successive values agree.
pub fn rl_derivative_left_fn(
    f: impl Fn(f64) -> f64,
    alpha: FracOrder,
    a: f64,
    x: f64,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    if x < a {
        return Err(Error::domain(format!("x = {x} is left of a = {a}")));
    }
    if x == a {
        return Err(Error::domain("left derivative at the base point is singular"));
    }
    refine_dyadic(
        opts,
        |d| {
            let g = TimeGrid::uniform(1 << d, a, x)?;
            let c = SampledFunction::from_fn(&g, &f, Interpolation::PiecewiseLinear)?.cells();
            Ok(c.left_derivative(alpha.value(), &g.last()))
        },
        "left derivative",
    )
}

/// `D^beta_{b-} g_{b-}(x)` for a closed-form `g`, dyadic refinement on `[x, b]`.
pub fn rl_derivative_right_fn(
    g: impl Fn(f64) -> f64,
    beta: FracOrder,
    b: f64,
    x: f64,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    if !(x < b) {
        return Err(Error::domain(format!("x = {x} must be left of b = {b}")));
    }
    refine_dyadic(
        opts,
        |d| {
            let grid = TimeGrid::uniform(1 << d, x, b)?;
            let c = SampledFunction::from_fn(&grid, &g, Interpolation::PiecewiseLinear)?.cells();
            Ok(c.right_derivative(beta.value(), &grid.first()))
        },
        "right derivative",
    )
}

/// `I^alpha_{a+} h(x) = Gamma(alpha)^{-1} int_a^x h(u) (x - u)^{alpha - 1} du`
/// with panels between `breakpoints`.
pub fn rl_integral_left(
    mut h: impl FnMut(&GridPoint) -> f64,
    breakpoints: &[GridPoint],
    alpha: FracOrder,
    a: f64,
    x: f64,
) -> Result<f64> {
    if !(x > a) {
        return Err(Error::domain(format!("need a < x, got a = {a}, x = {x}")));
    }
    let (pa, px) = (point_in(a)?, point_in(x)?);
    let pts = merge_points(&[breakpoints], pa, px);
    let panels = panels_between(&pts, 1.0 / 16.0, 0.5);
    let last = panels.len() - 1;
    let am1 = alpha.value() - 1.0;
    let mut acc = 0.0;
    for (i, p) in panels.iter().enumerate() {
        let p = p.graded(i == 0, i == last);
        acc += p.integrate(1, &mut |u| h(u) * u.lag_to(&px).powf(am1));
    }
    Ok(acc / gamma(alpha.value()))
}

/// Result of a weighted `L^1` norm near `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub value: f64,
    /// Estimate of the part beyond the last integrated log gap.
    pub truncation_bound: f64,
    pub u_max: f64,
    /// Partial integrals kept growing up to the largest representable log gap.
    pub diverged: bool,
}

const U_CAP: f64 = 700.0;

/// `int_a^1 |h(x)| rho(x) dx` for a function evaluated pointwise, with panels
/// between `breakpoints`. `singular_after[i]` grades the panel that starts at
/// `breakpoints[i]`. The stretch from the last finite break point to 1 is
/// integrated in log gap until the contributions die out.
pub fn weighted_l1_norm_of(
    mut h: impl FnMut(&GridPoint) -> f64,
    breakpoints: &[GridPoint],
    singular_after: &[bool],
    weight: &LogWeight,
    a: &GridPoint,
    subdiv: usize,
    opts: &IntegralOptions,
) -> Result<WeightedNorm> {
    let pa = *a;
    if !(pa.t >= 0.0 && pa.tail > 0.0) {
        return Err(Error::domain(format!("lower limit {} must lie in [0, 1)", pa.t)));
    }
    let one = GridPoint::from_t(1.0);
    let pts = merge_points(&[breakpoints], pa, one);
    let is_singular = |p: &GridPoint| -> bool {
        let i = breakpoints.partition_point(|q| q.lag_to(p) > 0.0);
        i < breakpoints.len() && breakpoints[i].lag_to(p) == 0.0 && singular_after.get(i).copied().unwrap_or(false)
    };
    let mut integrand = |x: &GridPoint| h(x).abs() * weight.eval_point(x);
    let finite = &pts[..pts.len() - 1];
    let mut value = 0.0;
    for p in panels_between(finite, opts.max_dx, opts.max_du) {
        let p = p.graded(is_singular(&p.a), false);
        value += p.integrate(subdiv, &mut integrand);
    }
    // last stretch to 1 in chunks of log gap
    let start = finite[finite.len() - 1];
    let mut u = start.log_gap();
    let first_graded = is_singular(&start);
    let mut prev_chunk = f64::INFINITY;
    let mut small_run = 0;
    let mut growing_run = 0;
    let mut last_chunk = 0.0;
    let mut first = true;
    let mut diverged = false;
    while u < U_CAP {
        let mut p = Panel::log_span(u, u + opts.max_du);
        if first {
            p.a = start;
            p = p.graded(first_graded, false);
        }
        let chunk = p.integrate(subdiv, &mut integrand);
        value += chunk;
        u += opts.max_du;
        if !value.is_finite() {
            diverged = true;
            break;
        }
        growing_run = if !first && chunk >= prev_chunk && chunk > 0.0 { growing_run + 1 } else { 0 };
        if growing_run >= 40 {
            diverged = true;
            break;
        }
        if chunk <= 1e-16 * value.abs() || chunk == 0.0 {
            small_run += 1;
        } else {
            small_run = 0;
        }
        last_chunk = chunk;
        prev_chunk = chunk;
        first = false;
        if small_run >= 4 && u - start.log_gap() >= opts.u_tail.min(8.0) {
            break;
        }
    }
    if u >= U_CAP && last_chunk > 1e-12 * value.abs() {
        diverged = true;
    }
    Ok(WeightedNorm {
        value,
        truncation_bound: if diverged { f64::INFINITY } else { last_chunk * 4.0 },
        u_max: u,
        diverged,
    })
}

/// `int_{s_k}^1 |D^alpha_{s_k+} f(x)| rho(x) dx` for every start `s_k` in one
/// pass, with `f` restricted to `[s_k, 1]` for each start. Starts must be
/// increasing and lie inside the domain of `f`, which must reach `t = 1`.
pub fn left_derivative_norms_from(
    f: &CellFunction,
    alpha: f64,
    starts: &[GridPoint],
    weight: &LogWeight,
    opts: &IntegralOptions,
) -> Result<Vec<WeightedNorm>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} is not in (0, 1)")));
    }
    if starts.is_empty() {
        return Ok(Vec::new());
    }
    if f.right_end().tail > 0.0 {
        return Err(Error::domain("the function must be given up to t = 1"));
    }
    if starts.windows(2).any(|w| !(w[0].lag_to(&w[1]) > 0.0)) {
        return Err(Error::domain("starts must be strictly increasing"));
    }
    let one = GridPoint::from_t(1.0);
    let r = f.restrict(&starts[0], &one)?;
    let inner = &r.nodes()[..r.nodes().len() - 1];
    let pos = merge_points(&[inner, starts], starts[0], one);
    let pos = &pos[..pos.len() - 1];
    let left_of = |j: usize, p: &GridPoint| -> (f64, f64) {
        // value and slope approached from the left, zero before the first node
        let c = r.cell_of(p);
        if j == 0 {
            (0.0, 0.0)
        } else if r.nodes()[c].lag_to(p) == 0.0 {
            (r.end_of_cell(c - 1), r.slope()[c - 1])
        } else {
            (r.eval(p), r.slope()[c])
        }
    };
    let mut jump = Vec::with_capacity(pos.len());
    let mut kink = Vec::with_capacity(pos.len());
    let mut left = Vec::with_capacity(pos.len());
    for (j, p) in pos.iter().enumerate() {
        let (lv, ls) = left_of(j, p);
        let c = r.cell_of(p);
        jump.push(r.eval(p) - lv);
        kink.push(r.slope()[c] - ls);
        left.push((lv, ls));
    }
    let first: Vec<usize> = starts
        .iter()
        .map(|s| pos.partition_point(|q| q.lag_to(s) > 0.0))
        .collect();
    let dim = starts.len();
    let one_minus = 1.0 - alpha;
    let scale = 1.0 / gamma(one_minus);
    let mut integrand = |x: &GridPoint, out: &mut [f64]| {
        let m = pos.partition_point(|q| q.lag_to(x) > 0.0);
        let w = weight.eval_point(x) * scale;
        let mut acc = 0.0;
        let mut k = dim;
        let mut j = m;
        out.iter_mut().for_each(|v| *v = 0.0);
        while k > 0 {
            let stop = first[k - 1];
            if stop >= m {
                k -= 1;
                continue;
            }
            while j > stop {
                j -= 1;
                let d = pos[j].lag_to(x);
                let dm = d.powf(-alpha);
                acc += jump[j] * dm + kink[j] * d * dm / one_minus;
            }
            // undo the part of f left of the start
            let d = pos[stop].lag_to(x);
            let dm = d.powf(-alpha);
            let (lv, ls) = left[stop];
            out[k - 1] = (acc + lv * dm + ls * d * dm / one_minus).abs() * w;
            k -= 1;
        }
    };
    let is_singular = |p: &GridPoint| -> bool {
        let i = pos.partition_point(|q| q.lag_to(p) > 0.0);
        i < pos.len() && pos[i].lag_to(p) == 0.0 && (jump[i] != 0.0 || left[i].0 != 0.0)
    };
    let mut value = vec![0.0; dim];
    for p in panels_between(pos, opts.max_dx, opts.max_du) {
        let p = p.graded(is_singular(&p.a), false);
        p.integrate_many(1, &mut value, &mut integrand);
    }
    let start = pos[pos.len() - 1];
    let u0 = start.log_gap();
    let mut u = u0;
    let mut chunk = vec![0.0; dim];
    let mut prev_total = f64::INFINITY;
    let mut last_total = 0.0;
    let mut small_run = 0;
    let mut growing_run = 0;
    let mut first_chunk = true;
    let mut diverged = false;
    while u < U_CAP {
        let mut p = Panel::log_span(u, u + opts.max_du);
        if first_chunk {
            p.a = start;
            p = p.graded(is_singular(&start), false);
        }
        chunk.iter_mut().for_each(|v| *v = 0.0);
        p.integrate_many(1, &mut chunk, &mut integrand);
        for (v, c) in value.iter_mut().zip(&chunk) {
            *v += c;
        }
        u += opts.max_du;
        if value.iter().any(|v| !v.is_finite()) {
            diverged = true;
            break;
        }
        let total: f64 = chunk.iter().sum();
        growing_run = if !first_chunk && total >= prev_total && total > 0.0 { growing_run + 1 } else { 0 };
        if growing_run >= 40 {
            diverged = true;
            break;
        }
        let small = chunk.iter().zip(&value).all(|(c, v)| *c <= 1e-16 * v.abs() || *c == 0.0);
        small_run = if small { small_run + 1 } else { 0 };
        last_total = total;
        prev_total = total;
        first_chunk = false;
        if small_run >= 4 && u - u0 >= opts.u_tail.min(8.0) {
            break;
        }
    }
    if u >= U_CAP && last_total > 1e-12 * value.iter().sum::<f64>() {
        diverged = true;
    }
    Ok(value
        .into_iter()
        .zip(&chunk)
        .map(|(v, c)| WeightedNorm {
            value: v,
            truncation_bound: if diverged { f64::INFINITY } else { c * 4.0 },
            u_max: u,
            diverged,
        })
        .collect())
}

/// Weighted `L^1` norm of a sampled function on `[a, 1]`.
pub fn weighted_l1_norm(h: &SampledFunction, weight: &LogWeight, a: f64, opts: &IntegralOptions) -> Result<WeightedNorm> {
    let cells = h.cells();
    let end = cells.right_end();
    if end.tail > 0.0 {
        return Err(Error::domain("the sampled function must be given up to t = 1"));
    }
    let n = cells.nodes().len();
    let bps = &cells.nodes()[..n - 1];
    weighted_l1_norm_of(|x| cells.eval(x), bps, &vec![false; bps.len()], weight, &point_in(a)?, 1, opts)
}

/// Empirical regularity `|g(x) - g(y)| <= C |x - y|^lambda |ln|x - y||^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub lambda: f64,
    pub nu: f64,
    /// Constant on the full grid.
    pub constant: f64,
    /// Constant on every second grid point.
    pub coarse_constant: f64,
}

impl RegularityCertificate {
    /// Fits the constant over pairs at dyadic index strides with lag `<= 1/2`.
    pub fn fit(g: &SampledFunction, lambda: f64, nu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) || nu < 0.0 {
            return Err(Error::domain("certificate needs lambda in (0, 1] and nu >= 0"));
        }
        let constant = Self::dyadic_constant(g.grid().points(), g.values(), lambda, nu);
        let coarse = g.grid().subsample(2)?;
        let cv: Vec<f64> = g.values().iter().step_by(2).copied().collect::<Vec<_>>();
        let cv = if cv.len() < coarse.len() {
            let mut v = cv;
            v.push(*g.values().last().unwrap());
            v
        } else {
            cv
        };
        let coarse_constant = Self::dyadic_constant(coarse.points(), &cv, lambda, nu);
        Ok(RegularityCertificate {
            lambda,
            nu,
            constant,
            coarse_constant,
        })
    }

    fn dyadic_constant(pts: &[GridPoint], v: &[f64], lambda: f64, nu: f64) -> f64 {
        let n = pts.len();
        let mut best: f64 = 0.0;
        let mut stride = 1;
        while stride < n {
            for i in 0..n - stride {
                let lag = pts[i].lag_to(&pts[i + stride]);
                if lag > 0.5 {
                    continue;
                }
                let denom = lag.powf(lambda) * (-lag.ln()).powf(nu);
                best = best.max((v[i + stride] - v[i]).abs() / denom);
            }
            stride *= 2;
        }
        best
    }

    /// The constant does not grow by more than a factor 2 under refinement.
    pub fn is_stable(&self) -> bool {
        self.constant.is_finite() && self.constant <= 2.0 * self.coarse_constant.max(f64::MIN_POSITIVE)
    }

    pub fn holds(&self, x: f64, y: f64, gx: f64, gy: f64) -> bool {
        let lag = (x - y).abs();
        if lag == 0.0 || lag >= 1.0 {
            return true;
        }
        (gx - gy).abs() <= self.constant * lag.powf(self.lambda) * (-lag.ln()).powf(self.nu) * (1.0 + 1e-12)
    }
}

/// Least-squares slope of `ln max|g(x_{i+s}) - g(x_i)|` against the log of
/// the mean lag over dyadic strides `s` with mean lag in
/// `[min_lag, min(1/2, span / 4)]`.
pub fn fit_holder_exponent(pts: &[GridPoint], v: &[f64], min_lag: f64) -> Option<f64> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let max_lag = (0.25 * pts[0].lag_to(&pts[n - 1])).min(0.5);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut stride = 1;
    while stride < n {
        let mut m: f64 = 0.0;
        let mut lag_sum = 0.0;
        for i in 0..n - stride {
            m = m.max((v[i + stride] - v[i]).abs());
            lag_sum += pts[i].lag_to(&pts[i + stride]);
        }
        let lag = lag_sum / (n - stride) as f64;
        if lag >= min_lag && lag <= max_lag && m > 0.0 {
            xs.push(lag.ln());
            ys.push(m.ln());
        }
        stride *= 2;
    }
    if xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

fn check_regularity(g: &SampledFunction, alpha: f64, opts: &IntegralOptions) -> Result<()> {
    let lambda = match opts.lambda {
        Some(l) => {
            let cert = RegularityCertificate::fit(g, l, opts.nu)?;
            if !cert.is_stable() {
                return Err(Error::Regularity(format!(
                    "constant {} grows under refinement (coarse {})",
                    cert.constant, cert.coarse_constant
                )));
            }
            l
        }
        None => {
            let pts = g.grid().points();
            let min_step = g.grid().steps().into_iter().fold(f64::INFINITY, f64::min);
            fit_holder_exponent(pts, g.values(), 8.0 * min_step)
                .unwrap_or(1.0)
                .min(1.0)
        }
    };
    if lambda + alpha <= 1.0 {
        return Err(Error::Regularity(format!(
            "integrator exponent {lambda:.3} plus alpha {alpha} does not exceed 1"
        )));
    }
    Ok(())
}

fn product_integral(
    fc: &CellFunction,
    gc: &CellFunction,
    alpha: f64,
    subdiv: usize,
    opts: &IntegralOptions,
) -> f64 {
    let lo = fc.left_end();
    let hi = fc.right_end();
    let pts = merge_points(&[fc.nodes(), gc.nodes()], lo, hi);
    let jump_at = |c: &CellFunction, p: &GridPoint, left_end_counts: bool| -> bool {
        let nodes = c.nodes();
        let i = nodes.partition_point(|q| q.lag_to(p) > 0.0);
        if i >= nodes.len() || nodes[i].lag_to(p) != 0.0 {
            return false;
        }
        (i > 0 || left_end_counts) && c.jump(i) != 0.0
    };
    let beta = 1.0 - alpha;
    let mut integrand = |x: &GridPoint| fc.left_derivative(alpha, x) * gc.right_derivative(beta, x);
    let mut acc = 0.0;
    let ends_at_one = hi.tail == 0.0;
    let finite = if ends_at_one { &pts[..pts.len() - 1] } else { &pts[..] };
    for p in panels_between(finite, opts.max_dx, opts.max_du) {
        let p = p.graded(jump_at(fc, &p.a, true), jump_at(gc, &p.b, false));
        acc += p.integrate(subdiv, &mut integrand);
    }
    if ends_at_one {
        let start = finite[finite.len() - 1];
        let u0 = start.log_gap();
        let mut u = u0;
        while u < u0 + opts.u_tail {
            let mut p = Panel::log_span(u, u + opts.max_du);
            if u == u0 {
                p.a = start;
                p = p.graded(jump_at(fc, &start, true), false);
            }
            acc += p.integrate(subdiv, &mut integrand);
            u += opts.max_du;
        }
    }
    // the real-convention derivatives carry phases whose product is -1
    -acc
}

/// `int_0^1 f dg` as `-int (D^alpha_{0+} f)(D^{1-alpha}_{1-} g_{1-}) dx`.
///
/// Panels follow the union of both grids; panel refinement doubles until
/// successive values agree. `weight` is the weight of the admissibility
/// check on `D^alpha f`.
pub fn extended_fractional_integral(
    f: &SampledFunction,
    g: &SampledFunction,
    alpha: FracOrder,
    weight: &LogWeight,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    let lo = f.grid().first().t.max(g.grid().first().t);
    let hi = f.grid().last().t.min(g.grid().last().t);
    extended_fractional_integral_on(f, g, alpha, weight, lo, hi, opts)
}

/// The extended integral over `[a, b]`, using `D^alpha_{a+}` and `D^{1-alpha}_{b-}`.
pub fn extended_fractional_integral_on(
    f: &SampledFunction,
    g: &SampledFunction,
    alpha: FracOrder,
    weight: &LogWeight,
    a: f64,
    b: f64,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    let (pa, pb) = (point_in(a)?, point_in(b)?);
    let fc = f.cells().restrict(&pa, &pb)?;
    let gc = g.cells().restrict(&pa, &pb)?;
    integrate_cells(&fc, &gc, alpha, weight, Some(g), opts)
}

fn integrate_cells(
    fc: &CellFunction,
    gc: &CellFunction,
    alpha: FracOrder,
    weight: &LogWeight,
    g: Option<&SampledFunction>,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    let al = alpha.value();
    if opts.check_regularity {
        if let Some(g) = g {
            check_regularity(g, al, opts)?;
        }
    }
    if opts.check_admissibility {
        let n = fc.nodes().len();
        let bps = &fc.nodes()[..n - 1];
        let sing: Vec<bool> = (0..bps.len()).map(|j| fc.jump(j) != 0.0).collect();
        let a = fc.left_end();
        let norm = |subdiv| {
            if fc.right_end().tail == 0.0 {
                weighted_l1_norm_of(|x| fc.left_derivative(al, x), bps, &sing, weight, &a, subdiv, opts)
            } else {
                // sub-interval ending before 1: the weight is bounded there
                let mut acc = 0.0;
                for p in panels_between(fc.nodes(), opts.max_dx, opts.max_du) {
                    let sing_a = {
                        let i = bps.partition_point(|q| q.lag_to(&p.a) > 0.0);
                        i < bps.len() && bps[i].lag_to(&p.a) == 0.0 && sing[i]
                    };
                    acc += p
                        .graded(sing_a, false)
                        .integrate(subdiv, &mut |x| fc.left_derivative(al, x).abs() * weight.eval_point(x));
                }
                Ok(WeightedNorm {
                    value: acc,
                    truncation_bound: 0.0,
                    u_max: fc.right_end().log_gap(),
                    diverged: false,
                })
            }
        };
        let n1 = norm(1)?;
        let n2 = norm(2)?;
        if n1.diverged || n2.diverged || (n1.value - n2.value).abs() > 1e-2 * n2.value.abs().max(1e-12) {
            return Err(Error::Admissibility(format!(
                "weighted norm of D^alpha f does not stabilize ({} vs {})",
                n1.value, n2.value
            )));
        }
    }
    let mut prev = product_integral(fc, gc, al, 1, opts);
    let mut subdiv = 1usize;
    for depth in 1..=opts.max_depth {
        subdiv *= 2;
        let cur = product_integral(fc, gc, al, subdiv, opts);
        let diff = (cur - prev).abs();
        if diff <= opts.tol * cur.abs().max(1.0) {
            return Ok(IntegralEstimate {
                value: cur,
                error_estimate: diff,
                depth,
            });
        }
        prev = cur;
    }
    Err(Error::Nonconvergence(format!(
        "extended integral did not stabilize within depth {}",
        opts.max_depth
    )))
}

/// Extended integral of closed-form `f` and `g` on `[a, b]`, sampled on
/// dyadic grids of `2^d` cells until successive values agree.
pub fn extended_integral_of_fns(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    alpha: FracOrder,
    weight: &LogWeight,
    a: f64,
    b: f64,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    let mut inner = *opts;
    inner.check_admissibility = false;
    inner.check_regularity = false;
    inner.tol = opts.tol * 0.1;
    let mut checked = false;
    refine_dyadic(
        opts,
        |d| {
            let grid = TimeGrid::uniform(1 << d, a, b)?;
            let fs = SampledFunction::from_fn(&grid, &f, Interpolation::PiecewiseLinear)?;
            let gs = SampledFunction::from_fn(&grid, &g, Interpolation::PiecewiseLinear)?;
            let mut o = inner;
            if !checked {
                o.check_admissibility = opts.check_admissibility;
                o.check_regularity = opts.check_regularity;
                checked = true;
            }
            Ok(integrate_cells(&fs.cells(), &gs.cells(), alpha, weight, Some(&gs), &o)?.value)
        },
        "extended integral",
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YoungRule {
    /// `sum (f_i + f_{i+1}) / 2 * (g_{i+1} - g_i)`.
    #[default]
    Trapezoid,
    /// `sum f_i (g_{i+1} - g_i)`.
    LeftPoint,
}

/// Riemann-Stieltjes sum of `f dg` over the union of both grids.
pub fn young_sum_integral(f: &SampledFunction, g: &SampledFunction, rule: YoungRule) -> Result<f64> {
    let (fc, gc) = (f.cells(), g.cells());
    let lo = f.grid().first().t.max(g.grid().first().t);
    let hi = f.grid().last().t.min(g.grid().last().t);
    if !(lo < hi) {
        return Err(Error::domain("functions have no common interval"));
    }
    let same = f.grid() == g.grid();
    let (fv, gv): (Vec<f64>, Vec<f64>) = if same {
        (f.values().to_vec(), g.values().to_vec())
    } else {
        let pts = merge_points(&[fc.nodes(), gc.nodes()], GridPoint::from_t(lo), GridPoint::from_t(hi));
        let value = |c: &CellFunction, i: usize| {
            // left limit at the right end
            if i + 1 == pts.len() {
                c.right_limit()
            } else {
                c.eval(&pts[i])
            }
        };
        (0..pts.len()).map(|i| (value(&fc, i), value(&gc, i))).unzip()
    };
    let mut acc = 0.0;
    for i in 0..fv.len() - 1 {
        let dg = gv[i + 1] - gv[i];
        acc += match rule {
            YoungRule::Trapezoid => 0.5 * (fv[i] + fv[i + 1]) * dg,
            YoungRule::LeftPoint => fv[i] * dg,
        };
    }
    Ok(acc)
}

/// Young sums of closed-form functions on dyadic grids of `[0, 1]`.
pub fn young_sum_of_fns(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    rule: YoungRule,
    opts: &IntegralOptions,
) -> Result<IntegralEstimate> {
    refine_dyadic(
        opts,
        |d| {
            let grid = TimeGrid::uniform(1 << d, 0.0, 1.0)?;
            let fs = SampledFunction::from_fn(&grid, &f, Interpolation::PiecewiseLinear)?;
            let gs = SampledFunction::from_fn(&grid, &g, Interpolation::PiecewiseLinear)?;
            young_sum_integral(&fs, &gs, rule)
        },
        "Young sum",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_fn(grid, f, Interpolation::PiecewiseLinear).unwrap()
    }

    fn weight() -> LogWeight {
        LogWeight::new(0.2, 1.0).unwrap()
    }

    #[test]
    fn unit_integrand_against_identity() {
        let g = TimeGrid::uniform(8, 0.0, 1.0).unwrap();
        let v = extended_fractional_integral(
            &lin(&g, |_| 1.0),
            &lin(&g, |x| x),
            FracOrder::new(0.3).unwrap(),
            &weight(),
            &IntegralOptions::default(),
        )
        .unwrap();
        assert!((v.value - 1.0).abs() < 1e-7, "{v:?}");
    }

    #[test]
    fn smooth_pair_reaches_three_fifths() {
        let opts = IntegralOptions {
            tol: 1e-5,
            max_depth: 12,
            ..Default::default()
        };
        let v = extended_integral_of_fns(
            |x| x * x,
            |x| x * x * x,
            FracOrder::new(0.3).unwrap(),
            &weight(),
            0.0,
            1.0,
            &opts,
        )
        .unwrap();
        assert!((v.value - 0.6).abs() < 1e-4, "{v:?}");
        assert!(v.depth <= 12);
    }

    #[test]
    fn norms_from_many_starts_match_single_runs() {
        let tails: Vec<f64> = (0..=24).map(|k| 0.5 * (-(k as f64) * 0.4).exp()).chain([0.0]).collect();
        let nodes: Vec<GridPoint> = tails.iter().map(|&q| GridPoint::from_tail(q)).collect();
        let k = nodes.len() - 1;
        let start: Vec<f64> = (0..k).map(|i| if i % 5 == 2 { 0.0 } else { (i as f64 * 0.7).sin() }).collect();
        let slope: Vec<f64> = (0..k).map(|i| if i % 5 == 2 { 0.0 } else { (i as f64 * 1.3).cos() * 10.0 }).collect();
        let f = CellFunction::new(nodes.clone(), start, slope).unwrap();
        let weight = LogWeight::new(-0.3, 1.2).unwrap();
        let opts = IntegralOptions::default();
        let starts = [nodes[2], GridPoint::from_tail(0.5 * (-3.3f64).exp()), nodes[12], nodes[17]];
        let many = left_derivative_norms_from(&f, 0.4, &starts, &weight, &opts).unwrap();
        let one = GridPoint::from_t(1.0);
        for (s, m) in starts.iter().zip(&many) {
            let r = f.restrict(s, &one).unwrap();
            let bps = &r.nodes()[..r.nodes().len() - 1];
            let sing: Vec<bool> = (0..bps.len()).map(|j| r.jump(j) != 0.0).collect();
            let single = weighted_l1_norm_of(|x| r.left_derivative(0.4, x), bps, &sing, &weight, s, 1, &opts).unwrap();
            assert!((m.value - single.value).abs() < 1e-7 * single.value, "{} {}", m.value, single.value);
        }
    }

    #[test]
    fn left_derivative_closed_forms() {
        let g = TimeGrid::uniform(16, 0.0, 1.0).unwrap();
        let v = rl_derivative_left(&lin(&g, |x| x), FracOrder::new(0.3).unwrap(), 0.0, 1.0).unwrap();
        assert!((v - 1.100_547_405_523_665_7).abs() < 1e-12);
        let est = rl_derivative_left_fn(|u| u * u, FracOrder::new(0.3).unwrap(), 0.0, 0.5, &IntegralOptions::default())
            .unwrap();
        assert!((est.value - 0.398_509_644_097_539_7).abs() < 1e-4, "{est:?}");
    }

    #[test]
    fn right_derivative_closed_forms() {
        let g = TimeGrid::uniform(16, 0.0, 1.0).unwrap();
        let v = rl_derivative_right(&lin(&g, |x| 1.0 - x), FracOrder::new(0.4).unwrap(), 1.0, 0.0).unwrap();
        assert!((v - 1.119_174_954_070_122_3).abs() < 1e-12);
        assert!(rl_derivative_right(&lin(&g, |x| x), FracOrder::new(0.4).unwrap(), 0.5, 0.7).is_err());
    }

    #[test]
    fn weighted_norm_of_constant_is_gamma_integral() {
        let g = TimeGrid::from_times(&[0.0, 1.0]).unwrap();
        let one = lin(&g, |_| 1.0);
        let w = LogWeight::new(0.2, 0.75).unwrap();
        let n = weighted_l1_norm(&one, &w, 0.0, &IntegralOptions::default()).unwrap();
        assert!((n.value - 0.668_002_177_707_320_6).abs() < 1e-8, "{n:?}");
        assert!(!n.diverged);
    }

    #[test]
    fn weighted_norm_of_tail_indicator() {
        let g = TimeGrid::from_times(&[0.0, 0.9, 1.0]).unwrap();
        let ind = SampledFunction::new(g, vec![0.0, 1.0, 1.0], Interpolation::PiecewiseConstantLeft).unwrap();
        let w = LogWeight::new(0.2, 0.75).unwrap();
        let n = weighted_l1_norm(&ind, &w, 0.0, &IntegralOptions::default()).unwrap();
        assert!((n.value - 0.123_196_412_259_434_9).abs() < 1e-8, "{n:?}");
    }

    #[test]
    fn weighted_norm_flags_divergence() {
        let w = LogWeight::new(0.2, 0.75).unwrap();
        let pts = [GridPoint::from_t(0.0), GridPoint::from_t(0.5)];
        // |h| ~ (1 - x)^{-1.5} makes the weighted integrand grow in log gap
        let n = weighted_l1_norm_of(|x| x.tail.powf(-1.5), &pts, &[false, false], &w, &pts[0], 1, &IntegralOptions::default())
            .unwrap();
        assert!(n.diverged);
    }

    #[test]
    fn young_sums() {
        let g = TimeGrid::uniform(1 << 12, 0.0, 1.0).unwrap();
        let x = lin(&g, |x| x);
        let v = young_sum_integral(&x, &x, YoungRule::Trapezoid).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let l = young_sum_integral(&x, &x, YoungRule::LeftPoint).unwrap();
        assert!((l - 0.5).abs() < 2e-4);
        let c = lin(&g, |_| 2.0);
        let sq = lin(&g, |x| x.sin());
        let v = young_sum_integral(&c, &sq, YoungRule::LeftPoint).unwrap();
        assert!((v - 2.0 * 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn rough_integrator_is_rejected_for_small_alpha() {
        let g = TimeGrid::uniform(1 << 10, 0.0, 1.0).unwrap();
        // a Weierstrass-like function with Hoelder exponent about 1/2
        let w = |x: f64| (0..12).map(|k| 2f64.powf(-0.5 * k as f64) * (2f64.powi(k) * 6.0 * x).sin()).sum::<f64>();
        let f = lin(&g, |x| x);
        let r = extended_fractional_integral(
            &f,
            &lin(&g, w),
            FracOrder::new(0.2).unwrap(),
            &weight(),
            &IntegralOptions::default(),
        );
        assert!(matches!(r, Err(Error::Regularity(_))), "{r:?}");
    }

    #[test]
    fn inversion_reproduces_function() {
        let g = TimeGrid::uniform(256, 0.0, 1.0).unwrap();
        let f = lin(&g, |x| x * x).cells();
        let alpha = FracOrder::new(0.3).unwrap();
        for &y in &[0.05, 0.4, 0.95] {
            let v = rl_integral_left(|u| f.left_derivative(0.3, u), f.nodes(), alpha, 0.0, y).unwrap();
            assert!((v - y * y).abs() < 1e-3, "{y}: {v}");
        }
    }
}

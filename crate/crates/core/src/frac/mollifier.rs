//! Mollification `g_N = g_{1-} * psi_N` with the bump
//! `psi(v) = Z^{-1} exp(-1/(v + 1) + 1/v)` supported on `[-1, 0]`.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::grid::GridPoint;

use super::cells::CellFunction;
use super::quadrature::{merge_points, Panel};
use super::{FracOrder, LogWeight, SampledFunction};

const TABLE_CELLS: usize = 4096;

fn raw_bump(v: f64) -> f64 {
    if v <= -1.0 || v >= 0.0 {
        0.0
    } else {
        (-1.0 / (v + 1.0) + 1.0 / v).exp()
    }
}

struct BumpTable {
    norm: f64,
    /// Cumulative mass at `-1 + k h`.
    cdf: Vec<f64>,
}

fn table() -> &'static BumpTable {
    static TABLE: OnceLock<BumpTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let rule = GaussLegendre::new(10).expect("valid degree");
        let h = 1.0 / TABLE_CELLS as f64;
        let mut cdf = Vec::with_capacity(TABLE_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_CELLS {
            let a = -1.0 + k as f64 * h;
            acc += rule.integrate(a, a + h, raw_bump);
            cdf.push(acc);
        }
        let norm = acc;
        for c in &mut cdf {
            *c /= norm;
        }
        BumpTable { norm, cdf }
    })
}

/// Normalized bump `psi(v)`.
pub fn bump(v: f64) -> f64 {
    raw_bump(v) / table().norm
}

/// `Psi(w) = int_{-1}^w psi`, 0 below `-1` and 1 above 0.
pub fn bump_cdf(w: f64) -> f64 {
    if w <= -1.0 {
        return 0.0;
    }
    if w >= 0.0 {
        return 1.0;
    }
    let t = table();
    let h = 1.0 / TABLE_CELLS as f64;
    let s = (w + 1.0) / h;
    let k = (s.floor() as usize).min(TABLE_CELLS - 1);
    let theta = s - k as f64;
    let a = -1.0 + k as f64 * h;
    // cubic Hermite with the exact density as derivative
    let (y0, y1) = (t.cdf[k], t.cdf[k + 1]);
    let (d0, d1) = (bump(a) * h, bump(a + h) * h);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + theta) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
}

/// `g_N'(x)` for `g_N = g_{1-} * psi_N`, with `g_{1-} = g - g(1-)` on
/// `[0, 1)` and zero elsewhere.
pub fn mollified_derivative(g: &CellFunction, n: f64, x: &GridPoint) -> f64 {
    let nodes = g.nodes();
    let k = g.cells();
    let width = 1.0 / n;
    let mut i = g.cell_of(x);
    let mut acc = 0.0;
    while i < k {
        let yl = nodes[i];
        let yr = nodes[i + 1];
        let dl = x.lag_to(&yl);
        if dl >= width {
            break;
        }
        // Psi(N (x - y)) with x - y = -(y - x)
        let cl = if dl <= 0.0 { 1.0 } else { bump_cdf(-n * dl) };
        let cr = bump_cdf(-n * x.lag_to(&yr));
        acc += g.slope()[i] * (cl - cr);
        if i > 0 && dl > 0.0 {
            acc += g.jump(i) * n * bump(-n * dl);
        }
        i += 1;
    }
    acc
}

/// `int_0^1 f(y) g_N'(y) dy`.
pub fn mollified_integral(f: &SampledFunction, g: &SampledFunction, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("mollifier index N must be at least 1"));
    }
    let nf = n as f64;
    let max_step = g.grid().steps().into_iter().fold(0.0, f64::max);
    if max_step > 1.0 / (8.0 * nf) * (1.0 + 1e-9) {
        return Err(Error::resolution(format!(
            "mollifier window 1/{n} spans fewer than 8 grid steps (largest step {max_step:e})"
        )));
    }
    let (fc, gc) = (f.cells(), g.cells());
    let lo = f.grid().first().t.max(g.grid().first().t);
    let hi = f.grid().last().t.min(g.grid().last().t);
    let pts = merge_points(&[fc.nodes()], GridPoint::from_t(lo), GridPoint::from_t(hi));
    let max_dx = (0.25 / nf).min(1.0 / 16.0);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let len = w[0].lag_to(&w[1]);
        let pieces = (len / max_dx).ceil().max(1.0) as usize;
        for j in 0..pieces {
            let a = w[0].lerp(&w[1], j as f64 / pieces as f64);
            let b = if j + 1 == pieces { w[1] } else { w[0].lerp(&w[1], (j + 1) as f64 / pieces as f64) };
            acc += Panel::linear(a, b).integrate(1, &mut |y| fc.eval(y) * mollified_derivative(&gc, nf, y));
        }
    }
    Ok(acc)
}

/// `sup_x |D^beta_{1-} g_N(x) - D^beta_{1-} g_{1-}(x)| / rho(x)` over the
/// sample points `xs`, using `D^beta g_N = (D^beta g_{1-}) * psi_N`.
/// Returns the supremum and the point where it is attained.
pub fn lemma6_discrepancy(
    g: &SampledFunction,
    beta: FracOrder,
    weight: &LogWeight,
    n: u32,
    xs: &[GridPoint],
) -> Result<(f64, GridPoint)> {
    if xs.is_empty() {
        return Err(Error::domain("no sample points"));
    }
    let gc = g.cells();
    if gc.right_end().tail != 0.0 {
        return Err(Error::domain("g must be sampled up to t = 1"));
    }
    let b = beta.value();
    let nf = n as f64;
    let d = |z: &GridPoint| -> f64 {
        if z.tail <= 0.0 {
            0.0
        } else {
            gc.right_derivative(b, z)
        }
    };
    let rule: Vec<(f64, f64)> = GaussLegendre::new(8)
        .expect("valid degree")
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let pieces = 16;
    let mut best = (0.0, xs[0]);
    for x in xs {
        let dx = d(x);
        // split the window at the point where z reaches 1
        let s_one = x.tail * nf;
        let mut acc = 0.0;
        for j in 0..pieces {
            let (lo, hi) = (j as f64 / pieces as f64, (j + 1) as f64 / pieces as f64);
            let cuts: Vec<f64> = if s_one > lo && s_one < hi { vec![lo, s_one, hi] } else { vec![lo, hi] };
            for c in cuts.windows(2) {
                let len = c[1] - c[0];
                for &(v, w) in &rule {
                    // s = -w_bump in (0, 1), z = x + s / N
                    let s = c[0] + len * v;
                    let z = if x.t >= 0.5 {
                        GridPoint::from_tail(x.tail - s / nf)
                    } else {
                        GridPoint::from_t(x.t + s / nf)
                    };
                    let z = if z.tail < 0.0 { GridPoint { t: 1.0, tail: 0.0 } } else { z };
                    acc += w * len * bump(-s) * (d(&z) - dx);
                }
            }
        }
        let ratio = acc.abs() / weight.eval_point(x);
        if ratio > best.0 {
            best = (ratio, *x);
        }
    }
    Ok(best)
}

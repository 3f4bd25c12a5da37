//! Panel quadrature on grids that may cluster at `t = 1`.
//!
//! A panel in the right half of `[0, 1]` is parametrized by the log gap
//! `u = -ln(1 - x)`, so points inside it carry exact tails. Each panel uses
//! Gauss-Legendre nodes after the smootherstep map `v^3 (10 - 15 v + 6 v^2)`,
//! which flattens algebraic endpoint behaviour. Panels next to a known
//! singular endpoint are graded geometrically toward it.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::grid::GridPoint;

pub(crate) const GL_DEGREE: usize = 10;
const GRADE_RATIO: f64 = 0.3;
const GRADE_LEVELS: usize = 27;
const MIN_GRADE_LEVELS: usize = 8;
const SETTLED_RATIO: f64 = 1e-5;

fn unit_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(GL_DEGREE)
            .expect("valid degree")
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

#[inline]
fn smootherstep(v: f64) -> (f64, f64) {
    let v2 = v * v;
    let w = v2 * v * (10.0 - 15.0 * v + 6.0 * v2);
    let dw = 30.0 * v2 * (1.0 - v) * (1.0 - v);
    (w, dw)
}

/// An integration panel between two grid points.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Panel {
    pub a: GridPoint,
    pub b: GridPoint,
    /// Grade toward `a` / toward `b`.
    pub singular_a: bool,
    pub singular_b: bool,
    /// Log-gap coordinates when the panel lies in the right half.
    log: Option<(f64, f64)>,
}

impl Panel {
    pub fn new(a: GridPoint, b: GridPoint) -> Self {
        let log = (a.t >= 0.5).then(|| (a.log_gap(), b.log_gap()));
        Panel {
            a,
            b,
            singular_a: false,
            singular_b: false,
            log,
        }
    }

    /// Panel parametrized linearly in `x` wherever it lies.
    pub fn linear(a: GridPoint, b: GridPoint) -> Self {
        Panel {
            a,
            b,
            singular_a: false,
            singular_b: false,
            log: None,
        }
    }

    /// Panel on `[a, b]` in log-gap coordinates with `b` given by its log gap
    /// (used to truncate the last cell before `t = 1`).
    pub fn log_span(ua: f64, ub: f64) -> Self {
        Panel {
            a: GridPoint::from_log_gap(ua),
            b: GridPoint::from_log_gap(ub),
            singular_a: false,
            singular_b: false,
            log: Some((ua, ub)),
        }
    }

    pub fn graded(mut self, at_a: bool, at_b: bool) -> Self {
        self.singular_a = at_a;
        self.singular_b = at_b;
        self
    }

    /// Point and `dx/dtheta` at parameter `theta` in `[0, 1]`.
    #[inline]
    fn point(&self, theta: f64) -> (GridPoint, f64) {
        match self.log {
            Some((ua, ub)) => {
                let u = ua + theta * (ub - ua);
                let p = GridPoint::from_log_gap(u);
                (p, p.tail * (ub - ua))
            }
            None => (self.a.lerp(&self.b, theta), self.a.lag_to(&self.b)),
        }
    }

    /// Point at parameter distance `s` from end `b` (accurate for tiny `s`).
    #[inline]
    fn point_from_b(&self, s: f64) -> (GridPoint, f64) {
        match self.log {
            Some((ua, ub)) => {
                let u = ub - s * (ub - ua);
                let p = GridPoint::from_log_gap(u);
                (p, p.tail * (ub - ua))
            }
            None => (self.b.lerp(&self.a, s), self.a.lag_to(&self.b)),
        }
    }

    fn plain<F: FnMut(&GridPoint) -> f64>(&self, lo: f64, hi: f64, from_b: bool, smooth: bool, f: &mut F) -> f64 {
        let len = hi - lo;
        let mut acc = 0.0;
        for &(v, w) in unit_rule() {
            let (s, ds) = if smooth { smootherstep(v) } else { (v, 1.0) };
            let theta = lo + len * s;
            let (p, jac) = if from_b { self.point_from_b(theta) } else { self.point(theta) };
            acc += w * ds * jac * f(&p);
        }
        acc * len
    }

    /// Coordinate magnitude over panel length at the approached end; parameter
    /// distances below `eps` times this no longer move the point.
    fn resolution_scale(&self, from_b: bool) -> f64 {
        match self.log {
            Some((ua, ub)) => (if from_b { ub } else { ua }).abs() / (ub - ua),
            None => {
                let len = self.a.lag_to(&self.b);
                let end = if from_b { self.b } else { self.a };
                (if end.t >= 0.5 { end.tail } else { end.t }) / len
            }
        }
    }

    fn graded_half<F: FnMut(&GridPoint) -> f64>(&self, hi: f64, from_b: bool, f: &mut F) -> f64 {
        // plain Gauss-Legendre on pieces [r^{l+1} hi, r^l hi]; the innermost remainder is closed by the
        // geometric series of the last two pieces (exact for a pure power)
        let floor = 64.0 * f64::EPSILON * self.resolution_scale(from_b);
        let mut acc = 0.0;
        let mut upper = hi;
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..GRADE_LEVELS {
            let lower = upper * GRADE_RATIO;
            if lower < floor {
                break;
            }
            prev = last;
            last = self.plain(lower, upper, from_b, false, f);
            acc += last;
            upper = lower;
        }
        let r = last / prev;
        if prev != 0.0 && r > 0.0 && r < 1.0 {
            acc + last * r / (1.0 - r)
        } else {
            acc
        }
    }

    /// `int f dx` over the panel split into `subdiv` equal parameter pieces.
    pub fn integrate<F: FnMut(&GridPoint) -> f64>(&self, subdiv: usize, f: &mut F) -> f64 {
        let n = subdiv.max(1);
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let lo = i as f64 * h;
            let hi = lo + h;
            let first = i == 0 && self.singular_a;
            let last = i + 1 == n && self.singular_b;
            acc += match (first, last) {
                (false, false) => self.plain(lo, hi, false, true, f),
                (true, false) => self.graded_half(hi, false, f),
                (false, true) => self.graded_half(h, true, f),
                (true, true) => self.graded_half(0.5, false, f) + self.graded_half(0.5, true, f),
            };
        }
        acc
    }
}

impl Panel {
    #[allow(clippy::too_many_arguments)]
    fn plain_many<F: FnMut(&GridPoint, &mut [f64])>(&self, lo: f64, hi: f64, from_b: bool, smooth: bool, buf: &mut [f64], out: &mut [f64], f: &mut F) {
        let len = hi - lo;
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(v, w) in unit_rule() {
            let (s, ds) = if smooth { smootherstep(v) } else { (v, 1.0) };
            let theta = lo + len * s;
            let (p, jac) = if from_b { self.point_from_b(theta) } else { self.point(theta) };
            f(&p, buf);
            let c = w * ds * jac * len;
            for (o, b) in out.iter_mut().zip(buf.iter()) {
                *o += c * b;
            }
        }
    }

    fn graded_half_many<F: FnMut(&GridPoint, &mut [f64])>(&self, hi: f64, from_b: bool, acc: &mut [f64], f: &mut F) {
        let dim = acc.len();
        let floor = 64.0 * f64::EPSILON * self.resolution_scale(from_b);
        let mut buf = vec![0.0; dim];
        let mut prev = vec![0.0; dim];
        let mut last = vec![0.0; dim];
        let mut piece = vec![0.0; dim];
        let mut ratio = vec![f64::NAN; dim];
        let mut upper = hi;
        for level in 0..GRADE_LEVELS {
            let lower = upper * GRADE_RATIO;
            if lower < floor {
                break;
            }
            self.plain_many(lower, upper, from_b, false, &mut buf, &mut piece, f);
            std::mem::swap(&mut prev, &mut last);
            last.copy_from_slice(&piece);
            for (a, p) in acc.iter_mut().zip(&piece) {
                *a += p;
            }
            upper = lower;
            // once every ratio of successive pieces has settled the series closes the rest
            let mut settled = true;
            for i in 0..dim {
                let r = last[i] / prev[i];
                settled &= (last[i] == 0.0 && prev[i] == 0.0) || (r - ratio[i]).abs() <= SETTLED_RATIO * r.abs();
                ratio[i] = r;
            }
            if settled && level >= MIN_GRADE_LEVELS {
                break;
            }
        }
        for i in 0..dim {
            let r = last[i] / prev[i];
            if prev[i] != 0.0 && r > 0.0 && r < 1.0 {
                acc[i] += last[i] * r / (1.0 - r);
            }
        }
    }

    /// Componentwise [`Panel::integrate`] of a vector valued integrand; the
    /// results are added to `acc`. Grading stops early once the pieces decay
    /// geometrically.
    pub fn integrate_many<F: FnMut(&GridPoint, &mut [f64])>(&self, subdiv: usize, acc: &mut [f64], f: &mut F) {
        let n = subdiv.max(1);
        let h = 1.0 / n as f64;
        let dim = acc.len();
        let mut buf = vec![0.0; dim];
        let mut piece = vec![0.0; dim];
        for i in 0..n {
            let lo = i as f64 * h;
            let hi = lo + h;
            let first = i == 0 && self.singular_a;
            let last = i + 1 == n && self.singular_b;
            match (first, last) {
                (false, false) => {
                    self.plain_many(lo, hi, false, true, &mut buf, &mut piece, f);
                    for (a, p) in acc.iter_mut().zip(&piece) {
                        *a += p;
                    }
                }
                (true, false) => self.graded_half_many(hi, false, acc, f),
                (false, true) => self.graded_half_many(h, true, acc, f),
                (true, true) => {
                    self.graded_half_many(0.5, false, acc, f);
                    self.graded_half_many(0.5, true, acc, f);
                }
            }
        }
    }
}

/// Consecutive panels between sorted break points. Panels in the left half
/// are capped at `max_dx`, panels in the right half at `max_du` in log gap.
pub(crate) fn panels_between(points: &[GridPoint], max_dx: f64, max_du: f64) -> Vec<Panel> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces = if a.t >= 0.5 {
            let du = b.log_gap() - a.log_gap();
            (du / max_du).ceil().max(1.0) as usize
        } else {
            (a.lag_to(&b) / max_dx).ceil().max(1.0) as usize
        };
        if pieces == 1 {
            out.push(Panel::new(a, b));
            continue;
        }
        if a.t >= 0.5 {
            let (ua, ub) = (a.log_gap(), b.log_gap());
            for k in 0..pieces {
                let u0 = ua + (ub - ua) * k as f64 / pieces as f64;
                let u1 = if k + 1 == pieces { ub } else { ua + (ub - ua) * (k + 1) as f64 / pieces as f64 };
                let mut p = Panel::log_span(u0, u1);
                if k == 0 {
                    p.a = a;
                }
                if k + 1 == pieces {
                    p.b = b;
                }
                out.push(p);
            }
        } else {
            for k in 0..pieces {
                let pa = if k == 0 { a } else { a.lerp(&b, k as f64 / pieces as f64) };
                let pb = if k + 1 == pieces { b } else { a.lerp(&b, (k + 1) as f64 / pieces as f64) };
                out.push(Panel::new(pa, pb));
            }
        }
    }
    out
}

/// Sorted union of point sets restricted to `[lo, hi]`, with both ends.
pub(crate) fn merge_points(sets: &[&[GridPoint]], lo: GridPoint, hi: GridPoint) -> Vec<GridPoint> {
    let mut all: Vec<GridPoint> = sets
        .iter()
        .flat_map(|s| s.iter().copied())
        .filter(|p| lo.lag_to(p) > 0.0 && p.lag_to(&hi) > 0.0)
        .collect();
    all.push(lo);
    all.push(hi);
    all.sort_by(|x, y| y.tail.partial_cmp(&x.tail).unwrap_or(std::cmp::Ordering::Equal));
    all.dedup_by(|x, y| !(y.lag_to(x) > 0.0));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let p = Panel::new(GridPoint::from_t(0.1), GridPoint::from_t(0.4));
        let v = p.integrate(1, &mut |x| x.t * x.t);
        assert!((v - (0.4f64.powi(3) - 0.1f64.powi(3)) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn graded_handles_endpoint_singularity() {
        let p = Panel::new(GridPoint::from_t(0.0), GridPoint::from_t(0.25)).graded(true, false);
        let v = p.integrate(1, &mut |x| x.t.powf(-0.8));
        let exact = 0.25f64.powf(0.2) / 0.2;
        assert!((v - exact).abs() < 1e-6 * exact, "{v} {exact}");
        let p = Panel::new(GridPoint::from_t(0.0), GridPoint::from_t(0.25)).graded(false, true);
        let v = p.integrate(3, &mut |x| (0.25 - x.t).max(0.0).powf(-0.6));
        let exact = 0.25f64.powf(0.4) / 0.4;
        assert!((v - exact).abs() < 1e-6 * exact, "{v} {exact}");
    }

    #[test]
    fn vector_integration_matches_scalar() {
        let p = Panel::new(GridPoint::from_t(0.0), GridPoint::from_t(0.25)).graded(true, false);
        let mut acc = [0.0; 2];
        p.integrate_many(2, &mut acc, &mut |x, out| {
            out[0] = x.t.powf(-0.8);
            out[1] = x.t * x.t;
        });
        let scalar = p.integrate(2, &mut |x| x.t.powf(-0.8));
        assert!((acc[0] - scalar).abs() < 1e-10 * scalar);
        assert!((acc[1] - 0.25f64.powi(3) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn log_panels_integrate_near_one() {
        // int_{1-e^{-2}}^{1-e^{-30}} (1-x)^{-1/2} dx
        let pts = [GridPoint::from_log_gap(2.0), GridPoint::from_log_gap(30.0)];
        let panels = panels_between(&pts, 0.05, 0.5);
        let v: f64 = panels.iter().map(|p| p.integrate(1, &mut |x| x.tail.powf(-0.5))).sum();
        let exact = 2.0 * ((-1.0f64).exp() - (-15.0f64).exp());
        assert!((v - exact).abs() < 1e-9 * exact, "{v} {exact}");
    }
}

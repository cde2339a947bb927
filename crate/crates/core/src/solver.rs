//! Minimizes `L(g, ℚ_n)` over convex `g` with knots at the data.
//!
//! A log-barrier Newton method on the slope-change constraints (and `g ≥ floor` in the
//! Rényi case) locates the solution; an active-set pass then re-solves exactly on the
//! detected knot set, adding or dropping knots until the integrated-CDF
//! characterization holds. The barrier iterate alone leaves `O(μ)` slack in the
//! equalities at knots, which is why the second pass exists.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::DensityFit;
use crate::linalg::{solve_tridiagonal, Pentadiagonal};
use crate::model::{PiecewiseLinear, PlConvexFn, RenyiIndex, Shape, SortedSample};
use crate::objective::{gradient_raw, hessian_raw, value_raw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Cap on barrier Newton iterations (the active-set pass has its own budget).
    pub max_newton_iters: usize,
    /// Initial barrier weight, divided by the number of barrier terms.
    pub barrier_mu0: f64,
    pub barrier_shrink: f64,
    /// Newton steps per barrier stage before `μ` shrinks regardless.
    pub barrier_stage_iters: usize,
    /// Barrier stages stop once `μ` falls below this.
    pub barrier_mu_min: f64,
    /// Newton-decrement tolerance inside a barrier stage.
    pub grad_tol: f64,
    /// Characterization tolerance relative to the sample range.
    pub char_tol: f64,
    pub mass_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_newton_iters: 2000,
            barrier_mu0: 1.0,
            barrier_shrink: 0.2,
            barrier_stage_iters: 10,
            barrier_mu_min: 1e-10,
            grad_tol: 1e-12,
            char_tol: 1e-7,
            mass_tol: 1e-6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.barrier_mu0, self.barrier_mu_min, self.grad_tol, self.char_tol, self.mass_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_newton_iters == 0 || self.barrier_stage_iters == 0 {
            return Err(Error::InvalidParameter("solver options must be positive".into()));
        }
        if !(self.barrier_shrink > 0.05 && self.barrier_shrink < 0.9) {
            return Err(Error::InvalidParameter(format!(
                "barrier_shrink {} must lie in (0.05, 0.9)",
                self.barrier_shrink
            )));
        }
        Ok(())
    }

    pub fn char_tol_abs(&self, sample: &SortedSample) -> f64 {
        self.char_tol * sample.range()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub mu: f64,
    pub barrier_objective: f64,
    pub objective: f64,
    /// First entry after `μ` shrank; the barrier objective may jump here.
    pub recentered: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub barrier_iterations: usize,
    pub polish_iterations: usize,
    pub knot_changes: usize,
    pub gradient_norm: f64,
    pub barrier_value: f64,
    pub final_mu: f64,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub char_residual: f64,
    pub warnings: Vec<String>,
}

struct Problem<'a> {
    x: &'a [f64],
    w: &'a [f64],
    shape: Shape,
    floor: f64,
    inv_dx: Vec<f64>,
}

/// Barrier iterate. The slope changes `c` are the primary state so that feasibility
/// is checked on stored values rather than on differences of nearly equal `g`s;
/// `g` is rebuilt from `(g₀, slope₀, c)` by cumulative sums.
#[derive(Clone)]
struct Point {
    g0: f64,
    s0: f64,
    c: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(sample: &'a SortedSample, shape: Shape, floor: f64) -> Self {
        let x = sample.points();
        let inv_dx = x.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        Self { x, w: sample.weights(), shape, floor, inv_dx }
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    /// Coefficients of the slope change at interior point `j` on `g_{j−1}, g_j, g_{j+1}`.
    fn constraint_row(&self, j: usize) -> [f64; 3] {
        let (a, b) = (self.inv_dx[j - 1], self.inv_dx[j]);
        [a, -(a + b), b]
    }

    fn slope_change(&self, g: &[f64], j: usize) -> f64 {
        let row = self.constraint_row(j);
        row[0] * g[j - 1] + row[1] * g[j] + row[2] * g[j + 1]
    }

    fn positive(&self) -> bool {
        self.shape.requires_positive()
    }

    fn objective(&self, g: &[f64]) -> f64 {
        value_raw(self.x, g, self.w, &self.shape)
    }

    fn point_from_values(&self, g: Vec<f64>) -> Point {
        let c = (1..self.n() - 1).map(|j| self.slope_change(&g, j)).collect();
        Point { g0: g[0], s0: (g[1] - g[0]) * self.inv_dx[0], c, g }
    }

    fn rebuild(&self, g0: f64, s0: f64, c: Vec<f64>) -> Point {
        let mut g = Vec::with_capacity(self.n());
        g.push(g0);
        let mut slope = s0;
        for k in 0..self.n() - 1 {
            if k > 0 {
                slope += c[k - 1];
            }
            g.push(g[k] + slope / self.inv_dx[k]);
        }
        Point { g0, s0, c, g }
    }

    /// `None` when the point is outside the barrier's domain.
    fn barrier_objective(&self, pt: &Point, mu: f64) -> Option<f64> {
        let mut logs = 0.0;
        for &c in &pt.c {
            if !(c > 0.0) {
                return None;
            }
            logs += c.ln();
        }
        if self.positive() {
            for &v in &pt.g {
                let p = v - self.floor;
                if !(p > 0.0) {
                    return None;
                }
                logs += p.ln();
            }
        }
        let val = self.objective(&pt.g) - mu * logs;
        val.is_finite().then_some(val)
    }

    /// Max step keeping every barrier argument positive.
    fn max_step(&self, pt: &Point, dg: &[f64], dc: &[f64]) -> f64 {
        let mut t = f64::INFINITY;
        for (c, d) in pt.c.iter().zip(dc) {
            if *d < 0.0 {
                t = t.min(-c / d);
            }
        }
        if self.positive() {
            for (v, d) in pt.g.iter().zip(dg) {
                if *d < 0.0 {
                    t = t.min(-(v - self.floor) / d);
                }
            }
        }
        t
    }

    fn newton_system(&self, pt: &Point, mu: f64) -> (Vec<f64>, Pentadiagonal) {
        let g = &pt.g;
        let mut grad = gradient_raw(self.x, g, self.w, &self.shape);
        let mut h = Pentadiagonal::from_tridiagonal(&hessian_raw(self.x, g, &self.shape));
        for j in 1..self.n() - 1 {
            let row = self.constraint_row(j);
            let c = pt.c[j - 1];
            for p in 0..3 {
                grad[j - 1 + p] -= mu * row[p] / c;
            }
            h.add_rank_one3(j - 1, row, mu / (c * c));
        }
        if self.positive() {
            for (i, &v) in g.iter().enumerate() {
                let p = v - self.floor;
                grad[i] -= mu / p;
                h.d0[i] += mu / (p * p);
            }
        }
        (grad, h)
    }

    /// Newton direction with diagonal regularization if the factorization breaks down.
    fn newton_direction(&self, grad: &[f64], h: &Pentadiagonal) -> Option<Vec<f64>> {
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        if let Some(d) = h.solve(&rhs) {
            return Some(d);
        }
        let scale = h.d0.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut reg = 1e-14 * scale;
        for _ in 0..12 {
            let mut hr = h.clone();
            hr.d0.iter_mut().for_each(|v| *v += reg);
            if let Some(d) = hr.solve(&rhs) {
                return Some(d);
            }
            reg *= 100.0;
        }
        None
    }
}

/// Starting point: a shallow parabola around the uniform level of the hull.
fn default_init(x: &[f64], shape: &Shape) -> Vec<f64> {
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let range = hi - lo;
    let (mid, half) = (0.5 * (lo + hi), 0.5 * range);
    let (level, bump) = match shape {
        Shape::Renyi(idx) => {
            let level = range.powf(-idx.s());
            (level, 0.1 * level)
        }
        Shape::LogConcave => (range.ln(), 0.1),
    };
    x.iter().map(|&xi| level + bump * ((xi - mid) / half).powi(2)).collect()
}

fn uniform_level(x: &[f64], shape: &Shape) -> f64 {
    let range = x[x.len() - 1] - x[0];
    match shape {
        Shape::Renyi(idx) => range.powf(-idx.s()),
        Shape::LogConcave => range.ln(),
    }
}

/// Greatest convex minorant of the points `(x_i, y_i)`, evaluated at every `x_i`.
pub fn convex_minorant(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b if it lies on or above the chord from a to i
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(x.len());
    let mut k = 0;
    for i in 0..x.len() {
        while k + 1 < hull.len() && hull[k + 1] < i {
            k += 1;
        }
        let (a, b) = (hull[k], hull[(k + 1).min(hull.len() - 1)]);
        if a == b || i == a {
            out.push(y[a]);
        } else {
            let lam = (x[i] - x[a]) / (x[b] - x[a]);
            out.push(y[a] + lam * (y[b] - y[a]));
        }
    }
    out
}

/// Turns an arbitrary start into a strictly feasible barrier point.
fn feasible_start(x: &[f64], start: &[f64], shape: &Shape, floor: f64) -> Result<Vec<f64>> {
    if start.len() != x.len() || start.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial values must be finite, one per support point".into()));
    }
    let hull = convex_minorant(x, start);
    let scale = hull.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let bump = 1e-3 * scale;
    let mut g: Vec<f64> = x.iter().zip(&hull).map(|(&xi, &h)| h + bump * ((xi - mid) / half).powi(2)).collect();
    if shape.requires_positive() {
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= floor {
            // re-floor by lifting
            let lift = floor - min + 1e-3 * scale;
            g.iter_mut().for_each(|v| *v += lift);
        }
    }
    Ok(g)
}

struct BarrierOutcome {
    g: Vec<f64>,
    iterations: usize,
    mu: f64,
    barrier_value: f64,
    completed: bool,
}

/// Knots are inserted while the residual exceeds this times the sample range.
const ADD_TOL_REL: f64 = 1e-12;

/// Barrier slope changes above this fraction of the largest seed the active set.
const ANCHOR_SEED_REL: f64 = 1e-3;

/// Barrier start from values. Slope changes recomputed from `g` on tiny gaps can
/// lose their sign to rounding, so they are floored at those of a shallow parabola
/// before `g` is rebuilt and lifted above the positivity floor.
fn start_point(p: &Problem, g: Vec<f64>) -> Point {
    let pt = p.point_from_values(g);
    let x = p.x;
    let n = x.len();
    let half = 0.5 * (x[n - 1] - x[0]);
    let scale = pt.g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let curv = 1e-6 * scale / (half * half);
    let c: Vec<f64> = (1..n - 1).map(|j| pt.c[j - 1].max(curv * (x[j + 1] - x[j - 1]))).collect();
    let mut out = p.rebuild(pt.g0, pt.s0, c);
    if p.positive() {
        let min = out.g.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= p.floor {
            let lift = p.floor - min + 1e-3 * scale;
            out = p.rebuild(out.g0 + lift, out.s0, out.c);
        }
    }
    out
}

fn run_barrier(p: &Problem, g: Vec<f64>, mu0: f64, opts: &SolverOptions, trace: &mut Vec<TraceEntry>) -> BarrierOutcome {
    let mut pt = start_point(p, g);
    let mut mu = mu0;
    let mut iterations = 0;
    let mut completed = true;
    let mut phi = p.barrier_objective(&pt, mu).unwrap_or(f64::INFINITY);
    'stages: loop {
        trace.push(TraceEntry { mu, barrier_objective: phi, objective: p.objective(&pt.g), recentered: true });
        for _ in 0..opts.barrier_stage_iters {
            if iterations >= opts.max_newton_iters {
                completed = false;
                break 'stages;
            }
            let (grad, h) = p.newton_system(&pt, mu);
            let Some(dg) = p.newton_direction(&grad, &h) else {
                completed = false;
                break 'stages;
            };
            let slope: f64 = grad.iter().zip(&dg).map(|(a, b)| a * b).sum();
            // centered once the decrement in the μ-scaled metric is small
            if -slope * 0.5 <= opts.grad_tol.max(1e-2 * mu) || !slope.is_finite() {
                break;
            }
            let dc: Vec<f64> = (1..p.n() - 1).map(|j| p.slope_change(&dg, j)).collect();
            let ds0 = (dg[1] - dg[0]) * p.inv_dx[0];
            let mut t = (0.99 * p.max_step(&pt, &dg, &dc)).min(1.0);
            let mut accepted = None;
            for _ in 0..60 {
                let c: Vec<f64> = pt.c.iter().zip(&dc).map(|(a, d)| a + t * d).collect();
                let cand = p.rebuild(pt.g0 + t * dg[0], pt.s0 + t * ds0, c);
                if let Some(v) = p.barrier_objective(&cand, mu) {
                    if v <= phi + 1e-4 * t * slope {
                        accepted = Some((cand, v));
                        break;
                    }
                }
                t *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((cand, v)) => {
                    pt = cand;
                    phi = v;
                    trace.push(TraceEntry { mu, barrier_objective: phi, objective: p.objective(&pt.g), recentered: false });
                }
                // no decrease possible at this μ: rounding floor reached
                None => break,
            }
        }
        if mu < opts.barrier_mu_min {
            break;
        }
        mu *= opts.barrier_shrink;
        phi = p.barrier_objective(&pt, mu).unwrap_or(f64::INFINITY);
    }
    BarrierOutcome { g: pt.g, iterations, mu, barrier_value: phi, completed }
}

/// Exact minimization over functions linear between anchor points, with knot
/// insertion/deletion driven by the integrated-CDF residual.
struct ActiveSet<'a> {
    p: &'a Problem<'a>,
    cum_w: Vec<f64>,
}

struct PolishOutcome {
    g: Vec<f64>,
    newton_iterations: usize,
    knot_changes: usize,
    gradient_norm: f64,
    converged: bool,
}

impl<'a> ActiveSet<'a> {
    fn anchor_weights(&self, anchors: &[usize]) -> Vec<f64> {
        let x = self.p.x;
        let mut b = vec![0.0; anchors.len()];
        for k in 0..anchors.len() - 1 {
            let (a, c) = (anchors[k], anchors[k + 1]);
            let span = x[c] - x[a];
            for i in a..c {
                let lam = (x[i] - x[a]) / span;
                b[k] += self.p.w[i] * (1.0 - lam);
                b[k + 1] += self.p.w[i] * lam;
            }
        }
        b[anchors.len() - 1] += self.p.w[x.len() - 1];
        b
    }

    fn expand(&self, anchors: &[usize], theta: &[f64]) -> Vec<f64> {
        let x = self.p.x;
        let mut g = vec![0.0; x.len()];
        for k in 0..anchors.len() - 1 {
            let (a, c) = (anchors[k], anchors[k + 1]);
            let span = x[c] - x[a];
            for i in a..c {
                let lam = (x[i] - x[a]) / span;
                g[i] = theta[k] + lam * (theta[k + 1] - theta[k]);
            }
        }
        g[x.len() - 1] = theta[anchors.len() - 1];
        g
    }

    fn slope_changes(&self, anchors: &[usize], theta: &[f64]) -> Vec<f64> {
        let x = self.p.x;
        (1..anchors.len() - 1)
            .map(|k| {
                let left = (theta[k] - theta[k - 1]) / (x[anchors[k]] - x[anchors[k - 1]]);
                let right = (theta[k + 1] - theta[k]) / (x[anchors[k + 1]] - x[anchors[k]]);
                right - left
            })
            .collect()
    }

    /// Damped Newton on the reduced problem; returns the optimum and iteration count.
    fn newton(&self, anchors: &[usize], mut theta: Vec<f64>) -> Option<(Vec<f64>, usize, f64)> {
        let ax: Vec<f64> = anchors.iter().map(|&i| self.p.x[i]).collect();
        let b = self.anchor_weights(anchors);
        let shape = &self.p.shape;
        let feasible = |t: &[f64]| !shape.requires_positive() || t.iter().all(|&v| v > 0.0);
        let mut val = value_raw(&ax, &theta, &b, shape);
        let mut prev_dec = f64::INFINITY;
        let mut grad_norm = f64::INFINITY;
        for it in 0..200 {
            let grad = gradient_raw(&ax, &theta, &b, shape);
            grad_norm = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let h = hessian_raw(&ax, &theta, shape);
            let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
            let dir = solve_tridiagonal(&h, &rhs)?;
            let dec: f64 = -grad.iter().zip(&dir).map(|(a, d)| a * d).sum::<f64>();
            if !(dec > 1e-24 * (1.0 + val.abs())) || (dec < 1e-16 && dec > 0.25 * prev_dec) {
                return Some((theta, it, grad_norm));
            }
            prev_dec = dec;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                if feasible(&cand) {
                    let v = value_raw(&ax, &cand, &b, shape);
                    if v.is_finite() && v <= val - 1e-4 * t * dec {
                        theta = cand;
                        val = v;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                return Some((theta, it, grad_norm));
            }
        }
        Some((theta, 200, grad_norm))
    }

    fn residuals(&self, g: &[f64]) -> Vec<f64> {
        let x = self.p.x;
        let mut out = Vec::with_capacity(x.len());
        out.push(0.0);
        let (mut fcum, mut acc) = (0.0, 0.0);
        for j in 0..x.len() - 1 {
            let len = x[j + 1] - x[j];
            let [m0, m1]: [f64; 2] = self.p.shape.density_moments(g[j], g[j + 1]);
            acc += len * (fcum - self.cum_w[j]) + len * len * (m0 - m1);
            fcum += len * m0;
            out.push(acc);
        }
        out
    }

    fn value(&self, anchors: &[usize], theta: &[f64]) -> f64 {
        value_raw(self.p.x, &self.expand(anchors, theta), self.p.w, &self.p.shape)
    }

    fn run(&self, g0: &[f64], mut anchors: Vec<usize>, add_tol: f64, max_rounds: usize) -> Option<PolishOutcome> {
        let mut theta: Vec<f64> = anchors.iter().map(|&i| g0[i]).collect();
        let mut newton_iterations = 0;
        let mut knot_changes = 0;
        let mut gradient_norm = f64::INFINITY;
        // Batch drops are fast but not monotone; once a round fails to improve on the
        // best feasible value the pass falls back to the one-at-a-time rule.
        let mut batch = true;
        let mut best_feasible = f64::INFINITY;
        let mut last_single: Option<usize> = None;
        for _ in 0..max_rounds {
            let (target, its, gn) = self.newton(&anchors, theta.clone())?;
            newton_iterations += its;
            gradient_norm = gn;
            let sc_target = self.slope_changes(&anchors, &target);
            let convex = sc_target.iter().all(|&c| c >= 0.0);
            if convex {
                let v = self.value(&anchors, &target);
                if batch && v >= best_feasible {
                    batch = false;
                }
                best_feasible = best_feasible.min(v);
            }
            if !convex {
                let mut keep = vec![true; anchors.len()];
                if batch {
                    for (k, &c) in sc_target.iter().enumerate() {
                        if c < 0.0 {
                            keep[k + 1] = false;
                        }
                    }
                } else {
                    // walk toward the target until the first knot flattens, then drop it
                    let sc_now = self.slope_changes(&anchors, &theta);
                    let mut t = 1.0;
                    let mut drop = 0;
                    for (k, (&now, &tgt)) in sc_now.iter().zip(&sc_target).enumerate() {
                        if tgt < 0.0 {
                            let tk = (now / (now - tgt)).max(0.0);
                            if tk < t {
                                t = tk;
                                drop = k;
                            }
                        }
                    }
                    for (th, tg) in theta.iter_mut().zip(&target) {
                        *th += t * (tg - *th);
                    }
                    let scale = theta.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
                    let tiny = 1e-13 * scale;
                    keep[drop + 1] = false;
                    for (k, &c) in self.slope_changes(&anchors, &theta).iter().enumerate() {
                        if c <= tiny {
                            keep[k + 1] = false;
                        }
                    }
                }
                // restricting a convex interpolant to fewer anchors keeps it convex
                let mut it = keep.iter();
                anchors.retain(|_| *it.next().unwrap());
                let mut it = keep.iter();
                theta.retain(|_| *it.next().unwrap());
                knot_changes += 1;
                continue;
            }
            theta = target;
            let g = self.expand(&anchors, &theta);
            let resid = self.residuals(&g);
            // Batch mode inserts one point per anchor interval. Otherwise only the global
            // argmax: with a single insertion the reduced optimum is guaranteed to have a
            // positive slope change there, which rules out add/drop cycles.
            let mut additions = Vec::new();
            for (k, w) in anchors.windows(2).enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for i in w[0] + 1..w[1] {
                    if resid[i] > add_tol && best.is_none_or(|(_, r)| resid[i] > r) {
                        best = Some((i, resid[i]));
                    }
                }
                if let Some((i, r)) = best {
                    additions.push((k + 1, i, r));
                }
            }
            if !batch && additions.len() > 1 {
                let top = additions.iter().copied().fold(additions[0], |a, b| if b.2 > a.2 { b } else { a });
                additions = vec![top];
            }
            if additions.is_empty() || (!batch && last_single == additions.first().map(|a| a.1)) {
                // nothing to insert, or the same insertion just failed at rounding level
                return Some(PolishOutcome { g, newton_iterations, knot_changes, gradient_norm, converged: true });
            }
            last_single = if batch { None } else { Some(additions[0].1) };
            for &(pos, i, _) in additions.iter().rev() {
                anchors.insert(pos, i);
                theta.insert(pos, g[i]);
            }
            knot_changes += additions.len();
        }
        let g = self.expand(&anchors, &theta);
        Some(PolishOutcome { g, newton_iterations, knot_changes, gradient_norm, converged: false })
    }
}

fn solve(sample: &SortedSample, shape: Shape, opts: &SolverOptions, init: Option<&[f64]>, mu0: f64) -> Result<(DensityFit, SolveReport)> {
    opts.validate()?;
    let x = sample.points();
    let mut report = SolveReport::default();
    if let Shape::Renyi(idx) = shape {
        if idx.s() <= -0.5 {
            let msg = format!("s = {} ≤ -1/2: population projections off the model may be ill-posed", idx.s());
            warn!("{msg}");
            report.warnings.push(msg);
        }
    }
    let floor = match shape {
        Shape::Renyi(_) => 1e-8 * uniform_level(x, &shape),
        Shape::LogConcave => f64::NEG_INFINITY,
    };
    let problem = Problem::new(sample, shape, floor);
    let start = match init {
        None => default_init(x, &shape),
        Some(v) => feasible_start(x, v, &shape, floor)?,
    };
    // μ₀ is per constraint so the initial duality gap does not grow with n
    let constraints = (x.len() - 2 + if shape.requires_positive() { x.len() } else { 0 }).max(1);
    let barrier = run_barrier(&problem, start, mu0 / constraints as f64, opts, &mut report.trace);
    report.barrier_iterations = barrier.iterations;
    report.final_mu = barrier.mu;
    report.barrier_value = barrier.barrier_value;
    if !barrier.completed {
        report.warnings.push("barrier stages stopped early".into());
    }
    debug!("barrier: {} iterations, final mu {:e}", barrier.iterations, barrier.mu);

    // anchors: ends plus barrier-detected knots
    let pl = PiecewiseLinear::new(x.to_vec(), barrier.g.clone())?;
    let barrier_fn = PlConvexFn::try_from(pl.clone()).unwrap_or_else(|_| {
        PlConvexFn::try_from(PiecewiseLinear::new(x.to_vec(), convex_minorant(x, &barrier.g)).unwrap()).unwrap()
    });
    // only clear knots seed the active set; missing ones are cheap to insert later
    let changes = barrier_fn.slope_changes();
    let max_change = changes.iter().fold(0.0f64, |a, c| a.max(*c));
    let mut anchors = vec![0];
    anchors.extend((1..x.len() - 1).filter(|&j| changes[j - 1] > ANCHOR_SEED_REL * max_change));
    anchors.push(x.len() - 1);
    anchors.dedup();

    let active = ActiveSet { p: &problem, cum_w: (0..x.len()).map(|i| sample.cdf_at_index(i)).collect() };
    let char_tol = opts.char_tol_abs(sample);
    let polish = active
        .run(barrier_fn.values(), anchors, ADD_TOL_REL * sample.range(), 10 * x.len() + 100)
        .ok_or_else(|| Error::InvalidParameter("reduced Newton system is singular".into()))?;
    report.polish_iterations = polish.newton_iterations;
    report.knot_changes = polish.knot_changes;
    report.gradient_norm = polish.gradient_norm;
    report.iterations = report.barrier_iterations + report.polish_iterations;

    let g = PlConvexFn::try_from(PiecewiseLinear::new(x.to_vec(), polish.g)?)?;
    let fit = DensityFit::new(g, shape, sample)?;
    report.char_residual = fit.max_char_residual();
    let mass_ok = (fit.total_mass() - 1.0).abs() <= opts.mass_tol;
    report.converged = polish.converged && mass_ok && fit.max_char_residual() <= char_tol;
    if !report.converged {
        return Err(Error::NonConvergence { fit: Box::new(fit), report: Box::new(report) });
    }
    Ok((fit, report))
}

/// Rényi-divergence estimator for the given index.
pub fn fit_renyi(sample: &SortedSample, index: RenyiIndex, opts: &SolverOptions) -> Result<(DensityFit, SolveReport)> {
    solve(sample, Shape::Renyi(index), opts, None, opts.barrier_mu0)
}

/// Same as [`fit_renyi`] from a caller-supplied start (one value per support point).
pub fn fit_renyi_from(
    sample: &SortedSample,
    index: RenyiIndex,
    opts: &SolverOptions,
    init: &[f64],
) -> Result<(DensityFit, SolveReport)> {
    solve(sample, Shape::Renyi(index), opts, Some(init), opts.barrier_mu0)
}

/// Log-concave maximum likelihood estimator.
pub fn fit_logconcave(sample: &SortedSample, opts: &SolverOptions) -> Result<(DensityFit, SolveReport)> {
    solve(sample, Shape::LogConcave, opts, None, opts.barrier_mu0)
}

pub fn fit_logconcave_from(sample: &SortedSample, opts: &SolverOptions, init: &[f64]) -> Result<(DensityFit, SolveReport)> {
    solve(sample, Shape::LogConcave, opts, Some(init), opts.barrier_mu0)
}

pub fn fit_shape(sample: &SortedSample, shape: Shape, opts: &SolverOptions) -> Result<(DensityFit, SolveReport)> {
    solve(sample, shape, opts, None, opts.barrier_mu0)
}

/// Fits along `s_list` (|s| decreasing), starting each solve from the previous one.
pub fn warm_start_path(sample: &SortedSample, s_list: &[f64], opts: &SolverOptions) -> Result<Vec<(DensityFit, SolveReport)>> {
    let indices = s_list.iter().map(|&s| RenyiIndex::new(s)).collect::<Result<Vec<_>>>()?;
    if s_list.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
        return Err(Error::InvalidParameter("s_list must have strictly decreasing |s|".into()));
    }
    let mut out: Vec<(DensityFit, SolveReport)> = Vec::with_capacity(indices.len());
    for idx in indices {
        let result = match out.last() {
            None => fit_renyi(sample, idx, opts)?,
            Some((prev, _)) => {
                let ratio = idx.s() / prev.shape().s();
                let init: Vec<f64> = prev.g().values().iter().map(|v| v.powf(ratio)).collect();
                solve(sample, Shape::Renyi(idx), opts, Some(&init), opts.barrier_mu0 * 1e-3)?
            }
        };
        out.push(result);
    }
    Ok(out)
}

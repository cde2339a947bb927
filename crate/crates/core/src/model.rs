//! Domain types and the s-concavity calculus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment;

/// The exponent bundle `s`, `α = 1 + s`, `β = 1 + 1/s`, `r = −1/s` for `−1 < s < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RenyiIndex {
    s: f64,
}

impl RenyiIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > -1.0 && s < 0.0) {
            return Err(Error::InvalidIndex { s });
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        1.0 + self.s
    }

    pub fn beta(&self) -> f64 {
        1.0 + 1.0 / self.s
    }

    /// Density exponent: `f = g^{−r}`.
    pub fn r(&self) -> f64 {
        -1.0 / self.s
    }
}

impl TryFrom<f64> for RenyiIndex {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<RenyiIndex> for f64 {
    fn from(i: RenyiIndex) -> f64 {
        i.s
    }
}

/// How a convex `g` is turned into a density: `g^{−r}` (Rényi, `s < 0`) or `e^{−g}`
/// (the log-concave limit `s = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Renyi(RenyiIndex),
    LogConcave,
}

impl Shape {
    /// `s`, with `0` marking the log-concave case.
    pub fn s(&self) -> f64 {
        match self {
            Shape::Renyi(idx) => idx.s(),
            Shape::LogConcave => 0.0,
        }
    }

    pub fn from_s(s: f64) -> Result<Self> {
        if s == 0.0 {
            Ok(Shape::LogConcave)
        } else {
            RenyiIndex::new(s).map(Shape::Renyi)
        }
    }

    pub fn density(&self, g: f64) -> f64 {
        match self {
            Shape::Renyi(idx) => g.powf(-idx.r()),
            Shape::LogConcave => (-g).exp(),
        }
    }

    /// Inverse of [`Shape::density`].
    pub fn g_of_density(&self, f: f64) -> f64 {
        match self {
            Shape::Renyi(idx) => f.powf(idx.s()),
            Shape::LogConcave => -f.ln(),
        }
    }

    pub fn requires_positive(&self) -> bool {
        matches!(self, Shape::Renyi(_))
    }

    /// `[∫₀¹ t^i f(φ(t)) dt]_{i<N}` on a segment with end values `u`, `v`.
    pub fn density_moments<const N: usize>(&self, u: f64, v: f64) -> [f64; N] {
        match self {
            Shape::Renyi(idx) => segment::power_moments(u, v, -idx.r()),
            Shape::LogConcave => segment::exp_moments(u, v),
        }
    }

    pub fn density_moment(&self, i: usize, u: f64, v: f64) -> f64 {
        match self {
            Shape::Renyi(idx) => segment::power_moment(i, -idx.r(), u, v),
            Shape::LogConcave => segment::exp_moment(i, u, v),
        }
    }

    /// Second-derivative weights `[∫ Ψ''(φ) t^i dt]_{i<3}` of the integral term.
    pub fn curvature_moments(&self, u: f64, v: f64) -> [f64; 3] {
        match self {
            Shape::Renyi(idx) => {
                let r = idx.r();
                segment::power_moments::<3>(u, v, -r - 1.0).map(|m| r * m)
            }
            Shape::LogConcave => segment::exp_moments(u, v),
        }
    }

    /// `∫₀¹ Ψ(φ(t)) dt`, `Ψ(y) = y^β/|β|` or `e^{−y}`.
    pub fn integral_term(&self, u: f64, v: f64) -> f64 {
        match self {
            Shape::Renyi(idx) => segment::power_mean(u, v, idx.beta()) / idx.beta().abs(),
            Shape::LogConcave => segment::exp_moments::<1>(u, v)[0],
        }
    }
}

/// Order statistics with tie-collapsed weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SortedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
    cum_weights: Vec<f64>,
    n_raw: usize,
}

impl SortedSample {
    /// Sorts `data`, merges ties and gives each raw observation weight `1/n`.
    pub fn new(data: &[f64]) -> Result<Self> {
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("observation {x}")));
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut points: Vec<f64> = Vec::with_capacity(n);
        let mut counts: Vec<usize> = Vec::with_capacity(n);
        for x in sorted {
            match points.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    points.push(x);
                    counts.push(1);
                }
            }
        }
        if points.len() < 2 {
            return Err(Error::DegenerateSample { distinct: points.len() });
        }
        let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(Self::assemble(points, weights, n))
    }

    /// Weighted sample; points must be strictly increasing, weights positive.
    pub fn weighted(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter("points and weights differ in length".into()));
        }
        if points.len() < 2 {
            return Err(Error::DegenerateSample { distinct: points.len() });
        }
        if points.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("weighted sample".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("points must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let n = points.len();
        Ok(Self::assemble(points, weights, n))
    }

    fn assemble(points: Vec<f64>, weights: Vec<f64>, n_raw: usize) -> Self {
        let mut cum_weights = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum_weights.push(acc);
        }
        // the last entry is exactly one by definition
        *cum_weights.last_mut().unwrap() = 1.0;
        Self { points, weights, cum_weights, n_raw }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_raw(&self) -> usize {
        self.n_raw
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    /// `𝔽_n` at the i-th support point (right-continuous).
    pub fn cdf_at_index(&self, i: usize) -> f64 {
        self.cum_weights[i]
    }

    /// Empirical CDF `𝔽_n(x)`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= x);
        if k == 0 {
            0.0
        } else {
            self.cum_weights[k - 1]
        }
    }

    /// `∫_{X₍₁₎}^x 𝔽_n(t) dt`.
    pub fn ecdf_integral(&self, x: f64) -> f64 {
        if x <= self.min() {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..self.points.len() {
            let lo = self.points[i];
            let hi = self.points.get(i + 1).copied().unwrap_or(f64::INFINITY).min(x);
            if hi <= lo {
                break;
            }
            acc += self.cum_weights[i] * (hi - lo);
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// `E_Q |X|^l` under the empirical measure.
    pub fn abs_moment(&self, l: u32) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * x.abs().powi(l as i32)).sum()
    }

    pub fn median(&self) -> f64 {
        let k = self.cum_weights.partition_point(|&c| c < 0.5);
        let k = k.min(self.len() - 1);
        if (self.cum_weights[k] - 0.5).abs() < 1e-15 && k + 1 < self.len() {
            0.5 * (self.points[k] + self.points[k + 1])
        } else {
            self.points[k]
        }
    }
}

/// Continuous piecewise-linear function on `[t₀, t_m]`, `+∞` outside.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidParameter("knots and values differ in length".into()));
        }
        if knots.len() < 2 {
            return Err(Error::InvalidParameter("need at least two knots".into()));
        }
        if knots.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("piecewise-linear knots/values".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Index `j` of the segment `[t_j, t_{j+1}]` containing `x` (clamped).
    pub fn segment_of(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return f64::INFINITY;
        }
        let j = self.segment_of(x);
        let (x0, x1) = (self.knots[j], self.knots[j + 1]);
        let lam = (x - x0) / (x1 - x0);
        self.values[j] + lam * (self.values[j + 1] - self.values[j])
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, g)| (g[1] - g[0]) / (t[1] - t[0]))
            .collect()
    }

    /// Slope changes `g'(t_j+) − g'(t_j−)` at interior knots `1..m`.
    pub fn slope_changes(&self) -> Vec<f64> {
        self.slopes().windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Second divided differences at interior knots.
    pub fn second_differences(&self) -> Vec<f64> {
        let slopes = self.slopes();
        (1..self.knots.len() - 1)
            .map(|j| 2.0 * (slopes[j] - slopes[j - 1]) / (self.knots[j + 1] - self.knots[j - 1]))
            .collect()
    }

    /// Max `|g|` over knots; the reference magnitude for tolerances.
    pub fn scale(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First violation of `second difference ≥ −tol`, if any.
    ///
    /// `tol = tol_rel·scale·2(1/Δ₋ + 1/Δ₊)/(Δ₋ + Δ₊)` with `Δ±` the adjacent gaps: on a
    /// unit-spaced grid this is `tol_rel·scale`, and on fine grids it stays above the
    /// rounding noise of the interpolated values, which grows like `1/Δ²`.
    pub fn convexity_violation(&self, tol_rel: f64) -> Option<(usize, f64)> {
        let scale = self.scale().max(f64::MIN_POSITIVE);
        let k = &self.knots;
        self.second_differences().into_iter().enumerate().find_map(|(i, d)| {
            let (dl, dr) = (k[i + 1] - k[i], k[i + 2] - k[i + 1]);
            let tol = tol_rel * scale * 2.0 * (1.0 / dl + 1.0 / dr) / (dl + dr);
            (d < -tol).then_some((i + 1, d))
        })
    }
}

/// Tolerance on second divided differences, relative to `max |g|`.
pub const CONVEXITY_TOL: f64 = 1e-10;

/// Piecewise-linear convex function; the decision variable of the estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct PlConvexFn(PiecewiseLinear);

impl PlConvexFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        PiecewiseLinear::new(knots, values)?.try_into()
    }

    pub fn as_linear(&self) -> &PiecewiseLinear {
        &self.0
    }

    pub fn into_linear(self) -> PiecewiseLinear {
        self.0
    }
}

impl TryFrom<PiecewiseLinear> for PlConvexFn {
    type Error = Error;
    fn try_from(pl: PiecewiseLinear) -> Result<Self> {
        if let Some((index, value)) = pl.convexity_violation(CONVEXITY_TOL) {
            return Err(Error::NotConvex { index, value });
        }
        Ok(Self(pl))
    }
}

impl std::ops::Deref for PlConvexFn {
    type Target = PiecewiseLinear;
    fn deref(&self) -> &PiecewiseLinear {
        &self.0
    }
}

/// Generalized mean `M_s(a, b; θ)`; `s = −∞` gives `min(a, b)`.
pub fn generalized_mean(a: f64, b: f64, theta: f64, s: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0 && theta > 0.0 && theta < 1.0);
    if s == f64::NEG_INFINITY {
        a.min(b)
    } else if s == 0.0 {
        a.powf(1.0 - theta) * b.powf(theta)
    } else if s < 0.0 && (a == 0.0 || b == 0.0) {
        0.0
    } else {
        ((1.0 - theta) * a.powf(s) + theta * b.powf(s)).powf(1.0 / s)
    }
}

/// A grid triple violating `p((1−θ)x₀ + θx₁) ≥ M_s(p(x₀), p(x₁); θ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityViolation {
    pub x0: f64,
    pub x1: f64,
    pub theta: f64,
    pub excess: f64,
}

/// Checks s-concavity on every grid triple `x₀ < x < x₁`.
///
/// `θ` is taken so that the interpolated point is itself a grid point; violations
/// beyond `1e−9·max f` are reported.
pub fn check_s_concavity(f: impl Fn(f64) -> f64, s: f64, grid: &[f64]) -> Vec<ConcavityViolation> {
    assert!(grid.len() >= 3, "need at least 3 grid points");
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for i in 0..grid.len() {
        for j in i + 2..grid.len() {
            for k in i + 1..j {
                let theta = (grid[k] - grid[i]) / (grid[j] - grid[i]);
                let mean = generalized_mean(vals[i], vals[j], theta, s);
                let excess = mean - vals[k];
                if excess > tol {
                    out.push(ConcavityViolation { x0: grid[i], x1: grid[j], theta, excess });
                }
            }
        }
    }
    out
}

/// `x ↦ g(x)^{−r}` on the domain of `g`, zero outside.
pub fn density_of(g: &PlConvexFn, index: RenyiIndex) -> impl Fn(f64) -> f64 + '_ {
    let r = index.r();
    move |x| {
        let v = g.eval(x);
        if v.is_finite() {
            v.powf(-r)
        } else {
            0.0
        }
    }
}

//! Optimality certificates for fits and for population projections.

use std::sync::Arc;

use serde::Serialize;

use crate::analytic::Law;
use crate::error::{Error, Result};
use crate::fit::DensityFit;
use crate::quad::{integrate, integrate_lower_tail, integrate_pieces, integrate_upper_tail, QuadScheme};
use crate::model::{Shape, SortedSample};

/// `F̂(x)`; exact per segment.
pub fn cdf_of_fit(fit: &DensityFit, x: f64) -> f64 {
    fit.cdf(x)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnotResidual {
    pub x: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketEntry {
    pub x: f64,
    /// `𝔽_n(x₀) − w(x₀)`; `w` is the merged weight, `1/n` without ties.
    pub lower: f64,
    pub fitted: f64,
    pub upper: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharReport {
    pub points: Vec<f64>,
    /// `I(t) = ∫_{X₍₁₎}^t (F̂ − 𝔽_n)` at every support point.
    pub residual_curve: Vec<f64>,
    pub max_positive_violation: f64,
    pub knot_equality_residuals: Vec<KnotResidual>,
    pub bracket_violations: Vec<BracketEntry>,
    pub tolerance: f64,
    pub pass: bool,
}

fn check_alignment(fit: &DensityFit, sample: &SortedSample) -> Result<()> {
    if fit.g().knots() != sample.points() {
        return Err(Error::KnotMismatch("fit knots differ from the sample support".into()));
    }
    Ok(())
}

/// Integrated-CDF characterization: `I ≤ tol` everywhere and `|I| ≤ tol` at knots.
pub fn characterization_residuals(fit: &DensityFit, sample: &SortedSample, tol: f64) -> Result<CharReport> {
    check_alignment(fit, sample)?;
    let residual_curve = fit.residual_curve(sample);
    let max_positive_violation = residual_curve.iter().fold(0.0f64, |a, &v| a.max(v));
    let knot_equality_residuals: Vec<KnotResidual> = fit
        .knot_indices()
        .iter()
        .map(|&j| KnotResidual { x: sample.points()[j], residual: residual_curve[j] })
        .collect();
    let bracket_violations = knot_bracket_check(fit, sample, tol)?.into_iter().filter(|b| !b.satisfied).collect();
    let pass = max_positive_violation <= tol && knot_equality_residuals.iter().all(|k| k.residual.abs() <= tol);
    Ok(CharReport {
        points: sample.points().to_vec(),
        residual_curve,
        max_positive_violation,
        knot_equality_residuals,
        bracket_violations,
        tolerance: tol,
        pass,
    })
}

/// Bracket `𝔽_n(x₀) − w(x₀) ≤ F̂(x₀) ≤ 𝔽_n(x₀)` at support point `i`.
pub fn bracket_at(fit: &DensityFit, sample: &SortedSample, i: usize, tol: f64) -> BracketEntry {
    let upper = sample.cdf_at_index(i);
    let lower = upper - sample.weights()[i];
    let x = sample.points()[i];
    let fitted = fit.cdf(x);
    BracketEntry { x, lower, fitted, upper, satisfied: fitted >= lower - tol && fitted <= upper + tol }
}

/// The bracket at every detected knot.
pub fn knot_bracket_check(fit: &DensityFit, sample: &SortedSample, tol: f64) -> Result<Vec<BracketEntry>> {
    check_alignment(fit, sample)?;
    Ok(fit.knot_indices().iter().map(|&j| bracket_at(fit, sample, j, tol)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentComparison {
    pub order: u32,
    pub fitted: f64,
    pub empirical: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean_fitted: f64,
    pub mean_empirical: f64,
    pub mean_difference: f64,
    pub abs_moments: Vec<MomentComparison>,
}

/// Mean identity and `E_P|X|^l ≤ E_Q|X|^l` for `l = 1..=l_max`.
///
/// The inequality is asserted only for `l < r − 1`; larger orders are rejected.
pub fn moment_checks(fit: &DensityFit, sample: &SortedSample, l_max: u32, tol: f64) -> Result<MomentReport> {
    if l_max == 0 {
        return Err(Error::InvalidParameter("l_max must be at least 1".into()));
    }
    if let Shape::Renyi(idx) = fit.shape() {
        if l_max as f64 >= idx.r() - 1.0 {
            return Err(Error::Integrability { order: l_max, limit: idx.r() - 1.0 });
        }
    }
    let mean_fitted = fit.mean();
    let mean_empirical = sample.mean();
    let abs_moments = (1..=l_max)
        .map(|l| {
            let fitted = fit.abs_moment(l);
            let empirical = sample.abs_moment(l);
            MomentComparison { order: l, fitted, empirical, holds: fitted <= empirical + tol }
        })
        .collect();
    Ok(MomentReport { mean_fitted, mean_empirical, mean_difference: (mean_fitted - mean_empirical).abs(), abs_moments })
}

/// Convex test functions for [`convex_order_check`].
#[derive(Clone)]
pub enum ConvexTest {
    /// `max_k (a_k + b_k x)`, integrated in closed form.
    MaxAffine(Vec<(f64, f64)>),
    /// Any convex function, integrated by quadrature.
    Smooth(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ConvexTest {
    pub fn constant(c: f64) -> Self {
        Self::MaxAffine(vec![(c, 0.0)])
    }

    /// `(x − c)₊`.
    pub fn hinge(c: f64) -> Self {
        Self::MaxAffine(vec![(0.0, 0.0), (-c, 1.0)])
    }

    /// `|x − c|`.
    pub fn abs_dev(c: f64) -> Self {
        Self::MaxAffine(vec![(-c, 1.0), (c, -1.0)])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::MaxAffine(pieces) => pieces.iter().map(|(a, b)| a + b * x).fold(f64::NEG_INFINITY, f64::max),
            Self::Smooth(h) => h(x),
        }
    }
}

impl std::fmt::Debug for ConvexTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MaxAffine(p) => f.debug_tuple("MaxAffine").field(p).finish(),
            Self::Smooth(_) => f.write_str("Smooth(..)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexOrderEntry {
    pub fitted: f64,
    pub empirical: f64,
    pub integrable: bool,
    pub holds: bool,
}

/// Active pieces of a max-affine function over `[lo, hi]` as `(from, to, a, b)`.
fn envelope(pieces: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    let mut x = lo;
    while x < hi {
        // active piece at x, ties broken toward the larger slope (active to the right)
        let (mut a, mut b) = pieces[0];
        for &(pa, pb) in &pieces[1..] {
            let (v, pv) = (a + b * x, pa + pb * x);
            if pv > v || (pv == v && pb > b) {
                a = pa;
                b = pb;
            }
        }
        let mut next = hi;
        for &(pa, pb) in pieces {
            if pb > b {
                let cross = (a - pa) / (pb - b);
                if cross > x && cross < next {
                    next = cross;
                }
            }
        }
        out.push((x, next, a, b));
        x = next;
    }
    out
}

/// `∫ h dP̂ ≤ ∫ h d𝔽_n + tol` for each test function.
pub fn convex_order_check(
    fit: &DensityFit,
    sample: &SortedSample,
    tests: &[ConvexTest],
    tol: f64,
    scheme: &QuadScheme,
) -> Result<Vec<ConvexOrderEntry>> {
    let (lo, hi) = fit.support();
    tests
        .iter()
        .map(|h| {
            let empirical: f64 = sample.points().iter().zip(sample.weights()).map(|(x, w)| w * h.eval(*x)).sum();
            let fitted = match h {
                ConvexTest::MaxAffine(pieces) if !pieces.is_empty() => envelope(pieces, lo, hi)
                    .into_iter()
                    .map(|(from, to, a, b)| fit.linear_integral(a, b, from, to))
                    .sum(),
                ConvexTest::MaxAffine(_) => return Err(Error::InvalidParameter("empty max-affine test".into())),
                ConvexTest::Smooth(f) => {
                    integrate_pieces(|x| f(x) * fit.density(x), fit.g().knots(), scheme).unwrap_or(f64::NAN)
                }
            };
            let integrable = fitted.is_finite() && empirical.is_finite();
            Ok(ConvexOrderEntry { fitted, empirical, integrable, holds: integrable && fitted <= empirical + tol })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub grid: Vec<f64>,
    /// `∫_{−∞}^x (F − G)` on the grid.
    pub residuals: Vec<f64>,
    /// `∫_ℝ (F − G)`.
    pub total: f64,
    pub max_residual: f64,
    pub argmax: f64,
    /// Grid points where the residual is within tolerance of zero.
    pub equality_points: Vec<f64>,
    /// Grid points where the candidate's `g = f^s` is strictly convex.
    pub strict_convexity_points: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Distribution-function characterization of a population projection.
///
/// `candidate` is the proposed projection (its `g = pdf^s` is tested for strict
/// convexity on the grid), `target` the law being projected. With closed-form CDF
/// primitives on both sides everything is exact; otherwise tails use substitution
/// quadrature.
pub fn population_projection_check(
    target: &dyn Law,
    candidate: &dyn Law,
    s: f64,
    grid: &[f64],
    tol: f64,
    scheme: &QuadScheme,
) -> Result<ProjectionReport> {
    if grid.len() < 3 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid needs at least 3 increasing points".into()));
    }
    let diff = |x: f64| candidate.cdf(x) - target.cdf(x);
    let (residuals, total) = match (candidate.cdf_primitive(grid[0]), target.cdf_primitive(grid[0])) {
        (Some(_), Some(_)) => {
            let res: Vec<f64> =
                grid.iter().map(|&x| candidate.cdf_primitive(x).unwrap() - target.cdf_primitive(x).unwrap()).collect();
            let total = match (target.mean(), candidate.mean()) {
                (Some(mg), Some(mf)) => mg - mf,
                _ => upper_compensated_total(target, candidate, grid, &res, scheme)?,
            };
            (res, total)
        }
        _ => {
            let mut acc = integrate_lower_tail(diff, grid[0], scheme)?;
            let mut res = vec![acc];
            for w in grid.windows(2) {
                acc += integrate(diff, w[0], w[1], scheme)?;
                res.push(acc);
            }
            let total = upper_compensated_total(target, candidate, grid, &res, scheme)?;
            (res, total)
        }
    };
    let (mut max_residual, mut argmax) = (f64::NEG_INFINITY, grid[0]);
    for (&x, &r) in grid.iter().zip(&residuals) {
        if r > max_residual {
            max_residual = r;
            argmax = x;
        }
    }
    let equality_points = grid.iter().zip(&residuals).filter(|(_, r)| r.abs() <= tol).map(|(x, _)| *x).collect();
    let g = |x: f64| candidate.pdf(x).powf(s);
    let strict_convexity_points: Vec<f64> = grid
        .windows(3)
        .filter(|w| {
            let delta = (w[1] - w[0]).min(w[2] - w[1]);
            let (gl, gm, gr) = (g(w[1] - delta), g(w[1]), g(w[1] + delta));
            gm < 0.5 * (gl + gr) - 1e-12 * gm.abs()
        })
        .map(|w| w[1])
        .collect();
    let equality_at_strict = strict_convexity_points
        .iter()
        .all(|&x| grid.iter().position(|&y| y == x).is_some_and(|i| residuals[i].abs() <= tol));
    let pass = total.abs() <= tol && max_residual <= tol && equality_at_strict;
    Ok(ProjectionReport {
        grid: grid.to_vec(),
        residuals,
        total,
        max_residual,
        argmax,
        equality_points,
        strict_convexity_points,
        tolerance: tol,
        pass,
    })
}

/// `∫_ℝ (F − G)` as the last grid residual plus the upper tail written in survival
/// functions, which avoids cancellation between two values near one.
fn upper_compensated_total(
    target: &dyn Law,
    candidate: &dyn Law,
    grid: &[f64],
    residuals: &[f64],
    scheme: &QuadScheme,
) -> Result<f64> {
    let last = grid[grid.len() - 1];
    let tail = integrate_upper_tail(|x| (1.0 - target.cdf(x)) - (1.0 - candidate.cdf(x)), last, scheme)?;
    Ok(residuals[residuals.len() - 1] + tail)
}

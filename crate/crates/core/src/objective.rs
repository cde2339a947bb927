//! The primal functional `L(g, ℚ_n) = Σ wᵢ g(Xᵢ) + ∫ Ψ(g)` in knot-value coordinates,
//! with `Ψ(y) = y^β/|β|` (Rényi) or `e^{−y}` (log-concave).

use crate::error::{Error, Result};
use crate::model::{PiecewiseLinear, RenyiIndex, Shape, SortedSample};
use crate::segment;

/// Numerical stabilization of the closed-form segment integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentIntegralScheme {
    degeneracy_threshold: f64,
    series_terms: usize,
}

impl SegmentIntegralScheme {
    pub fn new(degeneracy_threshold: f64, series_terms: usize) -> Result<Self> {
        if !(degeneracy_threshold > 0.0 && degeneracy_threshold <= 1e-4) {
            return Err(Error::InvalidParameter(format!(
                "degeneracy threshold {degeneracy_threshold} must lie in (0, 1e-4]"
            )));
        }
        if series_terms < 3 {
            return Err(Error::InvalidParameter("series_terms must be at least 3".into()));
        }
        Ok(Self { degeneracy_threshold, series_terms })
    }

    pub fn degeneracy_threshold(&self) -> f64 {
        self.degeneracy_threshold
    }
}

impl Default for SegmentIntegralScheme {
    fn default() -> Self {
        Self { degeneracy_threshold: 1e-6, series_terms: 3 }
    }
}

/// `∫₀^len (u + t(v−u)/len)^β dt` for `β < 0`.
pub fn segment_power_integral(u: f64, v: f64, len: f64, beta: f64) -> Result<f64> {
    segment_power_integral_with(u, v, len, beta, &SegmentIntegralScheme::default())
}

pub fn segment_power_integral_with(
    u: f64,
    v: f64,
    len: f64,
    beta: f64,
    scheme: &SegmentIntegralScheme,
) -> Result<f64> {
    if !(u > 0.0 && v > 0.0 && len > 0.0) || !(u.is_finite() && v.is_finite() && len.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "segment end values and length must be positive (u={u}, v={v}, len={len})"
        )));
    }
    if !(beta < 0.0) {
        return Err(Error::InvalidParameter(format!("exponent {beta} must be negative")));
    }
    // order the ends so the result is exactly symmetric
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    if v - u > scheme.degeneracy_threshold * v {
        return Ok(len * segment::power_mean(u, v, beta));
    }
    // even-order Taylor series around the midpoint in δ = (v−u)/(u+v)
    let m = 0.5 * (u + v);
    let delta = (v - u) / (u + v);
    let d2 = delta * delta;
    let mut coeff = 1.0;
    let mut sum = 0.0;
    let mut dpow = 1.0;
    for j in 0..scheme.series_terms {
        let k = 2 * j;
        sum += coeff * dpow / (k + 1) as f64;
        coeff *= (beta - k as f64) * (beta - k as f64 - 1.0) / ((k + 1) * (k + 2)) as f64;
        dpow *= d2;
    }
    Ok(len * m.powf(beta) * sum)
}

/// Symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[j]` couples coordinates `j` and `j + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Weights of `Σ wᵢ g(Xᵢ)` on the knot values (sample points must all be knots).
pub(crate) fn linear_weights(g: &PiecewiseLinear, sample: &SortedSample) -> Result<Vec<f64>> {
    let knots = g.knots();
    let (lo, hi) = g.domain();
    if lo != sample.min() || hi != sample.max() {
        return Err(Error::KnotMismatch(format!(
            "domain [{lo}, {hi}] differs from sample hull [{}, {}]",
            sample.min(),
            sample.max()
        )));
    }
    let mut w = vec![0.0; knots.len()];
    let mut j = 0;
    for (&x, &wx) in sample.points().iter().zip(sample.weights()) {
        while j < knots.len() && knots[j] < x {
            j += 1;
        }
        if j == knots.len() || knots[j] != x {
            return Err(Error::KnotMismatch(format!("sample point {x} is not a knot")));
        }
        w[j] += wx;
    }
    Ok(w)
}

fn check_positive(g: &PiecewiseLinear, shape: &Shape) -> Result<()> {
    if shape.requires_positive() && g.min_value() <= 0.0 {
        return Err(Error::NotPositive { min: g.min_value() });
    }
    Ok(())
}

/// Value of the functional for arbitrary knot values `values` on `knots`.
pub fn value_raw(knots: &[f64], values: &[f64], linear: &[f64], shape: &Shape) -> f64 {
    let lin: f64 = linear.iter().zip(values).map(|(w, g)| w * g).sum();
    let mut integral = 0.0;
    for j in 0..knots.len() - 1 {
        let len = knots[j + 1] - knots[j];
        integral += len * shape.integral_term(values[j], values[j + 1]);
    }
    lin + integral
}

pub fn gradient_raw(knots: &[f64], values: &[f64], linear: &[f64], shape: &Shape) -> Vec<f64> {
    let mut grad = linear.to_vec();
    for j in 0..knots.len() - 1 {
        let len = knots[j + 1] - knots[j];
        let [m0, m1]: [f64; 2] = shape.density_moments(values[j], values[j + 1]);
        grad[j] -= len * (m0 - m1);
        grad[j + 1] -= len * m1;
    }
    grad
}

pub fn hessian_raw(knots: &[f64], values: &[f64], shape: &Shape) -> Tridiagonal {
    let mut h = Tridiagonal::zeros(knots.len());
    for j in 0..knots.len() - 1 {
        let len = knots[j + 1] - knots[j];
        let [m0, m1, m2] = shape.curvature_moments(values[j], values[j + 1]);
        h.diag[j] += len * (m0 - 2.0 * m1 + m2);
        h.off[j] += len * (m1 - m2);
        h.diag[j + 1] += len * m2;
    }
    h
}

/// `L(g, ℚ_n)` for a general shape.
pub fn objective(g: &PiecewiseLinear, sample: &SortedSample, shape: &Shape) -> Result<f64> {
    check_positive(g, shape)?;
    let w = linear_weights(g, sample)?;
    Ok(value_raw(g.knots(), g.values(), &w, shape))
}

pub fn gradient(g: &PiecewiseLinear, sample: &SortedSample, shape: &Shape) -> Result<Vec<f64>> {
    check_positive(g, shape)?;
    let w = linear_weights(g, sample)?;
    Ok(gradient_raw(g.knots(), g.values(), &w, shape))
}

pub fn hessian(g: &PiecewiseLinear, sample: &SortedSample, shape: &Shape) -> Result<Tridiagonal> {
    check_positive(g, shape)?;
    linear_weights(g, sample)?;
    Ok(hessian_raw(g.knots(), g.values(), shape))
}

pub fn eval_objective(g: &PiecewiseLinear, sample: &SortedSample, index: RenyiIndex) -> Result<f64> {
    objective(g, sample, &Shape::Renyi(index))
}

pub fn objective_gradient(g: &PiecewiseLinear, sample: &SortedSample, index: RenyiIndex) -> Result<Vec<f64>> {
    gradient(g, sample, &Shape::Renyi(index))
}

pub fn objective_hessian(g: &PiecewiseLinear, sample: &SortedSample, index: RenyiIndex) -> Result<Tridiagonal> {
    hessian(g, sample, &Shape::Renyi(index))
}

/// `Σ wᵢ g(Xᵢ) + ∫ e^{−g}`.
pub fn logconcave_objective(g: &PiecewiseLinear, sample: &SortedSample) -> Result<f64> {
    objective(g, sample, &Shape::LogConcave)
}

pub fn logconcave_gradient(g: &PiecewiseLinear, sample: &SortedSample) -> Result<Vec<f64>> {
    gradient(g, sample, &Shape::LogConcave)
}

pub fn logconcave_hessian(g: &PiecewiseLinear, sample: &SortedSample) -> Result<Tridiagonal> {
    hessian(g, sample, &Shape::LogConcave)
}

/// `∫₀^len e^{−(u + t(v−u)/len)} dt`.
pub fn segment_exp_integral(u: f64, v: f64, len: f64) -> f64 {
    len * segment::exp_moments::<1>(u, v)[0]
}

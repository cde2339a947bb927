use crate::error::{Error, Result};
use crate::model::{PlConvexFn, Shape, SortedSample};
use crate::objective;

/// Slope changes below this fraction of the largest |slope| are not knots.
pub const KNOT_THRESHOLD: f64 = 1e-6;

/// A solved (or loaded) estimate with its closed-form CDF tables.
#[derive(Clone, Debug)]
pub struct DensityFit {
    g: PlConvexFn,
    shape: Shape,
    objective: f64,
    total_mass: f64,
    knot_set: Vec<f64>,
    knot_indices: Vec<usize>,
    cdf: Vec<f64>,
    integrated_cdf: Vec<f64>,
    max_char_residual: f64,
}

impl DensityFit {
    /// Builds the fit tables for `g` on `sample`; `g` must have its knots at the sample points.
    pub fn new(g: PlConvexFn, shape: Shape, sample: &SortedSample) -> Result<Self> {
        if g.knots() != sample.points() {
            return Err(Error::KnotMismatch("fit knots must equal the sample support points".into()));
        }
        let objective = objective::objective(&g, sample, &shape)?;
        let knots = g.knots();
        let vals = g.values();
        let m = knots.len();
        let mut cdf = Vec::with_capacity(m);
        let mut integrated = Vec::with_capacity(m);
        let (mut f_acc, mut h_acc) = (0.0, 0.0);
        cdf.push(0.0);
        integrated.push(0.0);
        for j in 0..m - 1 {
            let len = knots[j + 1] - knots[j];
            let [m0, m1]: [f64; 2] = shape.density_moments(vals[j], vals[j + 1]);
            h_acc += len * f_acc + len * len * (m0 - m1);
            f_acc += len * m0;
            cdf.push(f_acc);
            integrated.push(h_acc);
        }
        let knot_indices = detect_knots(&g);
        let knot_set = knot_indices.iter().map(|&j| knots[j]).collect();
        let mut fit = Self {
            g,
            shape,
            objective,
            total_mass: f_acc,
            knot_set,
            knot_indices,
            cdf,
            integrated_cdf: integrated,
            max_char_residual: 0.0,
        };
        let resid = fit.residual_curve(sample);
        let mut worst = resid.iter().fold(0.0f64, |a, &v| a.max(v));
        for &j in &fit.knot_indices {
            worst = worst.max(resid[j].abs());
        }
        fit.max_char_residual = worst;
        Ok(fit)
    }

    pub fn g(&self) -> &PlConvexFn {
        &self.g
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Data points (strictly inside the hull) where the slope of `g` changes.
    pub fn knot_set(&self) -> &[f64] {
        &self.knot_set
    }

    pub fn knot_indices(&self) -> &[usize] {
        &self.knot_indices
    }

    pub fn max_char_residual(&self) -> f64 {
        self.max_char_residual
    }

    pub fn support(&self) -> (f64, f64) {
        self.g.domain()
    }

    pub fn density(&self, x: f64) -> f64 {
        let v = self.g.eval(x);
        if v.is_finite() {
            self.shape.density(v)
        } else {
            0.0
        }
    }

    /// `F̂(x)`, in closed form.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.total_mass;
        }
        let j = self.g.segment_of(x);
        let t = self.g.knots()[j];
        let [m0]: [f64; 1] = self.shape.density_moments(self.g.values()[j], self.g.eval(x));
        self.cdf[j] + (x - t) * m0
    }

    /// `Ĥ(x) = ∫_{X₍₁₎}^x F̂`.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            let last = self.integrated_cdf.len() - 1;
            return self.integrated_cdf[last] + (x - hi) * self.total_mass;
        }
        let j = self.g.segment_of(x);
        let t = self.g.knots()[j];
        let len = x - t;
        let [m0, m1]: [f64; 2] = self.shape.density_moments(self.g.values()[j], self.g.eval(x));
        self.integrated_cdf[j] + len * self.cdf[j] + len * len * (m0 - m1)
    }

    pub fn cdf_at_knots(&self) -> &[f64] {
        &self.cdf
    }

    pub fn integrated_cdf_at_knots(&self) -> &[f64] {
        &self.integrated_cdf
    }

    /// `I(t_j) = ∫_{X₍₁₎}^{t_j} (F̂ − 𝔽_n)` at every knot.
    pub fn residual_curve(&self, sample: &SortedSample) -> Vec<f64> {
        let knots = self.g.knots();
        let mut out = Vec::with_capacity(knots.len());
        out.push(0.0);
        let mut acc = 0.0;
        for j in 0..knots.len() - 1 {
            let len = knots[j + 1] - knots[j];
            let ecdf_part = len * sample.cdf_at_index(j);
            let fit_part = self.integrated_cdf[j + 1] - self.integrated_cdf[j];
            acc += fit_part - ecdf_part;
            out.push(acc);
        }
        out
    }

    /// `M(f̂) = inf argmax f̂ = inf argmin ĝ`.
    pub fn mode(&self) -> f64 {
        let vals = self.g.values();
        let mut best = 0;
        for (j, &v) in vals.iter().enumerate() {
            if v < vals[best] {
                best = j;
            }
        }
        self.g.knots()[best]
    }

    /// Right derivative of `ĝ` at `x`.
    pub fn g_right_slope(&self, x: f64) -> f64 {
        let j = self.g.segment_of(x);
        let k = self.g.knots();
        let v = self.g.values();
        (v[j + 1] - v[j]) / (k[j + 1] - k[j])
    }

    /// `∫ x^l f̂` (signed) for `l ≥ 0`, exact per segment.
    pub fn raw_moment(&self, l: u32) -> f64 {
        let (pos, neg) = self.split_abs_moment(l);
        if l.is_multiple_of(2) {
            pos + neg
        } else {
            pos - neg
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// `∫ |x|^l f̂`.
    pub fn abs_moment(&self, l: u32) -> f64 {
        let (pos, neg) = self.split_abs_moment(l);
        pos + neg
    }

    /// `(∫_{x>0} |x|^l f̂, ∫_{x<0} |x|^l f̂)`.
    fn split_abs_moment(&self, l: u32) -> (f64, f64) {
        let knots = self.g.knots();
        let (mut pos, mut neg) = (0.0, 0.0);
        for j in 0..knots.len() - 1 {
            let (a, b) = (knots[j], knots[j + 1]);
            if a < 0.0 && b > 0.0 {
                let g0 = self.g.eval(0.0);
                neg += self.piece_abs_moment(0.0, a, g0, self.g.values()[j], l);
                pos += self.piece_abs_moment(0.0, b, g0, self.g.values()[j + 1], l);
            } else if b <= 0.0 {
                neg += self.piece_abs_moment(b, a, self.g.values()[j + 1], self.g.values()[j], l);
            } else {
                pos += self.piece_abs_moment(a, b, self.g.values()[j], self.g.values()[j + 1], l);
            }
        }
        (pos, neg)
    }

    /// `∫ |x|^l f` over the piece from `near` (closer to 0) to `far`; `|x|` grows along it,
    /// so the binomial expansion has only positive terms.
    fn piece_abs_moment(&self, near: f64, far: f64, g_near: f64, g_far: f64, l: u32) -> f64 {
        let len = (far - near).abs();
        if len == 0.0 {
            return 0.0;
        }
        let a = near.abs();
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=l as usize {
            let m = self.shape.density_moment(i, g_near, g_far);
            acc += binom * a.powi(l as i32 - i as i32) * len.powi(i as i32) * m;
            binom *= (l as usize - i) as f64 / (i + 1) as f64;
        }
        len * acc
    }

    /// `∫_a^b (α + βx) f̂` over a sub-interval of the support.
    pub(crate) fn linear_integral(&self, alpha: f64, beta: f64, a: f64, b: f64) -> f64 {
        let (lo, hi) = self.support();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        let knots = self.g.knots();
        let mut acc = 0.0;
        let j0 = self.g.segment_of(a);
        let j1 = self.g.segment_of(b);
        for j in j0..=j1 {
            let x0 = knots[j].max(a);
            let x1 = knots[j + 1].min(b);
            if x1 <= x0 {
                continue;
            }
            let len = x1 - x0;
            let [m0, m1]: [f64; 2] = self.shape.density_moments(self.g.eval(x0), self.g.eval(x1));
            acc += len * ((alpha + beta * x0) * m0 + beta * len * m1);
        }
        acc
    }
}

/// Indices of interior knots. A slope change counts when it exceeds
/// `KNOT_THRESHOLD·max|slope|` and also the rounding noise that stored values of
/// magnitude `|g|` induce on the adjacent gaps.
pub fn detect_knots(g: &PlConvexFn) -> Vec<usize> {
    let slopes = g.slopes();
    let x = g.knots();
    let max_slope = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let scale = g.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thresh = KNOT_THRESHOLD * max_slope;
    slopes
        .windows(2)
        .enumerate()
        .filter(|&(j, w)| {
            let noise = 64.0 * f64::EPSILON * scale * (1.0 / (x[j + 1] - x[j]) + 1.0 / (x[j + 2] - x[j + 1]));
            (w[1] - w[0]).abs() > thresh.max(noise)
        })
        .map(|(j, _)| j + 1)
        .collect()
}

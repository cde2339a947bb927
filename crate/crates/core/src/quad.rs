//! Adaptive Simpson quadrature with tail handling.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadScheme {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Tails are truncated where every integrated density falls below this.
    pub tail_cutoff: f64,
}

impl Default for QuadScheme {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_depth: 50, tail_cutoff: 1e-14 }
    }
}

struct Simpson<'a, F> {
    f: &'a F,
    max_depth: u32,
    failed: bool,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn step(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = ((self.f)(lm), (self.f)(rm));
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= self.max_depth || m <= a || m >= b {
            if delta.abs() > 15.0 * tol {
                self.failed = true;
            }
            return left + right + delta / 15.0;
        }
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        self.step(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + self.step(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}

/// `∫_a^b f` by adaptive Simpson; the tolerance is `max(abs_tol, rel_tol·|rough estimate|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scheme: &QuadScheme) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, scheme).map(|v| -v);
    }
    // seed the estimate on a few panels so peaked integrands are not missed
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let xs: Vec<f64> = (0..=2 * PANELS).map(|k| a + 0.5 * h * k as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let rough: f64 = (0..PANELS).map(|p| h / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2])).sum();
    let tol = scheme.abs_tol.max(scheme.rel_tol * rough.abs());
    let mut s = Simpson { f: &f, max_depth: scheme.max_depth, failed: false };
    let mut total = 0.0;
    for p in 0..PANELS {
        let (x0, x2) = (xs[2 * p], xs[2 * p + 2]);
        let whole = h / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
        total += s.step(x0, x2, fs[2 * p], fs[2 * p + 1], fs[2 * p + 2], whole, tol / PANELS as f64, 0);
    }
    if s.failed || !total.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    Ok(total)
}

/// Integrates over consecutive breakpoints `[p₀, p₁], [p₁, p₂], …`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], scheme: &QuadScheme) -> Result<f64> {
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate(&f, w[0], w[1], scheme)?;
    }
    Ok(total)
}

/// `∫_a^∞ f` via `x = a + t/(1−t)`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, scheme: &QuadScheme) -> Result<f64> {
    let g = |t: f64| {
        // the endpoint limit can be finite and nonzero (1/x² tails)
        let one_minus = (1.0 - t).max(1e-9);
        let t = 1.0 - one_minus;
        let v = f(a + t / one_minus) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, scheme)
}

/// `∫_{−∞}^b f`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, scheme: &QuadScheme) -> Result<f64> {
    integrate_upper_tail(|y| f(-y), -b, scheme)
}

/// Expands `[lo, hi]` outward until every function in `fs` is below `cutoff` at both ends.
pub fn effective_support(fs: &[&dyn Fn(f64) -> f64], lo: f64, hi: f64, cutoff: f64) -> (f64, f64) {
    let mut width = (hi - lo).max(1.0);
    let mut left = lo;
    while fs.iter().any(|f| f(left) >= cutoff) && width < 1e12 {
        left -= width;
        width *= 2.0;
    }
    let mut width = (hi - lo).max(1.0);
    let mut right = hi;
    while fs.iter().any(|f| f(right) >= cutoff) && width < 1e12 {
        right += width;
        width *= 2.0;
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x, 0.0, 3.0, &QuadScheme::default()).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x| x * x, 3.0, 0.0, &QuadScheme::default()).unwrap();
        assert!((v + 9.0).abs() < 1e-12);
    }

    #[test]
    fn tails() {
        let s = QuadScheme::default();
        let v = integrate_upper_tail(|x| (-x).exp(), 0.0, &s).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let v = integrate_lower_tail(|x| 1.0 / (1.0 + x * x), 0.0, &s).unwrap();
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }
}

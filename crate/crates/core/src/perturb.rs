//! Local mode perturbations of an `s`-concave density and the constants of the
//! mode minimax bound.
//!
//! For a convex `g` with minimum at `m₀`, `g̃_ε` replaces `g` on `[m₀ − c_ε ε, m₀ + ε]`
//! by two tangent lines: the tangent at `m₀ − c_ε ε` up to `m₀ − ε`, then the
//! tangent at `m₀ + ε`. `c_ε` makes the two lines meet at `m₀ − ε`, which becomes
//! the new mode of `f̃_ε = g̃_ε^{−r}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{effective_support, integrate, integrate_lower_tail, integrate_pieces, integrate_upper_tail, QuadScheme};
use crate::stats::ols;

/// A convex `g` near its minimum.
pub trait Profile: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// `g^{(k)}(x)`, when known.
    fn kth_derivative(&self, _k: u32, _x: f64) -> Option<f64> {
        None
    }
    /// `g(x) − g(a) − (x − a)g'(a)`; override when it can be formed without cancellation.
    fn tangent_gap(&self, x: f64, a: f64) -> f64 {
        self.value(x) - self.value(a) - (x - a) * self.derivative(a)
    }
}

/// `g(x) = level + coef·(x − center)^k`, `k` even.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerProfile {
    pub level: f64,
    pub coef: f64,
    pub center: f64,
    pub k: u32,
}

impl PowerProfile {
    pub fn new(level: f64, coef: f64, center: f64, k: u32) -> Result<Self> {
        if !(level > 0.0) || !(coef > 0.0) || k < 2 || !k.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "power profile needs level > 0, coef > 0 and even k >= 2 (got {level}, {coef}, {k})"
            )));
        }
        Ok(Self { level, coef, center, k })
    }
}

impl Profile for PowerProfile {
    fn value(&self, x: f64) -> f64 {
        self.level + self.coef * (x - self.center).powi(self.k as i32)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.k as f64 * self.coef * (x - self.center).powi(self.k as i32 - 1)
    }

    fn kth_derivative(&self, k: u32, x: f64) -> Option<f64> {
        if k > self.k {
            return Some(0.0);
        }
        let falling: f64 = (0..k).map(|j| (self.k - j) as f64).product();
        Some(self.coef * falling * (x - self.center).powi((self.k - k) as i32))
    }

    /// `u^k − v^k − k v^{k−1}(u − v) = (u − v)² Σ_j (j+1) u^{k−2−j} v^j`.
    fn tangent_gap(&self, x: f64, a: f64) -> f64 {
        let (u, v) = (x - self.center, a - self.center);
        let k = self.k as i32;
        let sum: f64 = (0..=k - 2).map(|j| (j + 1) as f64 * u.powi(k - 2 - j) * v.powi(j)).sum();
        self.coef * (u - v).powi(2) * sum
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, what: &str) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::RootFinding(format!("{what}: no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Purely relative scheme for the local pieces, whose integrands are `O(ε^k)`.
/// `g − g̃_ε` carries absolute rounding noise, so the target stays well above it.
fn local_scheme() -> QuadScheme {
    QuadScheme { abs_tol: 1e-300, rel_tol: 1e-10, max_depth: 40, tail_cutoff: 0.0 }
}

#[derive(Clone, Debug)]
pub struct PerturbedDensity<G> {
    g: G,
    m0: f64,
    epsilon: f64,
    c_eps: f64,
    k: u32,
    r: f64,
    /// `∫ g^{−r}`.
    base_mass: f64,
    /// `∫ (g̃_ε^{−r} − g^{−r})`.
    mass_excess: f64,
}

/// Builds `g̃_ε` with `c_ε` from bisection on `[1, 10]`; `r = −1/s > 1`.
pub fn build_perturbation<G: Profile>(g: G, m0: f64, epsilon: f64, k: u32, r: f64) -> Result<PerturbedDensity<G>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("k must be an even integer >= 2, got {k}")));
    }
    if !(r > 1.0) {
        return Err(Error::InvalidParameter(format!("r must exceed 1, got {r}")));
    }
    // the two tangents meet at m₀ − ε; written as a difference of tangent gaps so the
    // root keeps full relative accuracy when the gaps are O(ε^k)
    let at = m0 - epsilon;
    let right = g.tangent_gap(at, m0 + epsilon);
    let gap = |c: f64| right - g.tangent_gap(at, m0 - c * epsilon);
    let c_eps = bisect(gap, 1.0, 10.0, "continuity of the perturbation")?;
    let mut p = PerturbedDensity { g, m0, epsilon, c_eps, k, r, base_mass: f64::NAN, mass_excess: f64::NAN };
    if let Some((x, v)) = p.convexity_defect() {
        return Err(Error::InvalidParameter(format!("perturbed g is not convex near x = {x} (second difference {v})")));
    }
    let (a, b) = p.window();
    let f = |x: f64| p.g.value(x).powf(-r);
    let scheme = QuadScheme { abs_tol: 1e-15, rel_tol: 1e-13, ..QuadScheme::default() };
    p.base_mass = integrate_lower_tail(f, a, &scheme)?
        + integrate_pieces(f, &[a, m0 - epsilon, b], &scheme)?
        + integrate_upper_tail(f, b, &scheme)?;
    p.mass_excess = p.integrate_window(|x, anchor| p.density_difference(x, anchor))?;
    Ok(p)
}

impl<G: Profile> PerturbedDensity<G> {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c_eps(&self) -> f64 {
        self.c_eps
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn base(&self) -> &G {
        &self.g
    }

    /// `∫ g̃_ε^{−r}`.
    pub fn normalizer(&self) -> f64 {
        self.base_mass + self.mass_excess
    }

    pub fn base_mass(&self) -> f64 {
        self.base_mass
    }

    /// `∫ f̃_ε / ∫ f − 1`.
    pub fn relative_mass_excess(&self) -> f64 {
        self.mass_excess / self.base_mass
    }

    /// `[m₀ − c_ε ε, m₀ + ε]`.
    pub fn window(&self) -> (f64, f64) {
        (self.m0 - self.c_eps * self.epsilon, self.m0 + self.epsilon)
    }

    pub fn mode(&self) -> f64 {
        self.m0 - self.epsilon
    }

    pub fn g_tilde(&self, x: f64) -> f64 {
        let (a, b) = self.window();
        let mid = self.m0 - self.epsilon;
        if x >= a && x < mid {
            self.g.value(a) + (x - a) * self.g.derivative(a)
        } else if x >= mid && x < b {
            self.g.value(b) + (x - b) * self.g.derivative(b)
        } else {
            self.g.value(x)
        }
    }

    /// `∫` over the window, each half with the tangent anchor of its own branch so a
    /// rounding-level jump at `m₀ − ε` never enters an integrand.
    fn integrate_window(&self, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let (a, b) = self.window();
        let mid = self.m0 - self.epsilon;
        Ok(integrate(|x| f(x, a), a, mid, &local_scheme())? + integrate(|x| f(x, b), mid, b, &local_scheme())?)
    }

    /// `g̃_ε^{−r} − g^{−r}` on the branch tangent at `anchor`, without cancellation.
    fn density_difference(&self, x: f64, anchor: f64) -> f64 {
        let gx = self.g.value(x);
        gx.powf(-self.r) * (-self.r * (-self.g.tangent_gap(x, anchor) / gx).ln_1p()).exp_m1()
    }

    /// Unnormalized `f̃_ε = g̃_ε^{−r}`.
    pub fn f_tilde(&self, x: f64) -> f64 {
        self.g_tilde(x).powf(-self.r)
    }

    /// Normalized `f_ε`.
    pub fn density(&self, x: f64) -> f64 {
        self.f_tilde(x) / self.normalizer()
    }

    /// Normalized base density `f = g^{−r} / ∫ g^{−r}`.
    pub fn base_density(&self, x: f64) -> f64 {
        self.g.value(x).powf(-self.r) / self.base_mass
    }

    /// Jumps of `g̃_ε` at `m₀ − ε` and `m₀ + ε`.
    pub fn junction_gaps(&self) -> (f64, f64) {
        let (a, b) = self.window();
        let mid = self.m0 - self.epsilon;
        let left_line = self.g.value(a) + (mid - a) * self.g.derivative(a);
        let right_line = self.g.value(b) + (mid - b) * self.g.derivative(b);
        (left_line - right_line, self.g.value(b) - self.g_tilde(b))
    }

    /// First slope decrease found on a grid around the window, if any.
    pub fn convexity_defect(&self) -> Option<(f64, f64)> {
        let (a, b) = self.window();
        let width = b - a;
        let n = 400;
        let xs: Vec<f64> = (0..=n).map(|i| a - width + 3.0 * width * i as f64 / n as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| self.g_tilde(x)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        (1..n).find_map(|i| {
            let d2 = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            (d2 < -1e-12 * scale).then_some((xs[i], d2))
        })
    }

    /// `h²(f_ε, f)`, splitting off the exact contribution outside the window.
    pub fn hellinger_sq_to_base(&self) -> Result<f64> {
        let (a, b) = self.window();
        let mid = self.m0 - self.epsilon;
        let rel = self.mass_excess / self.base_mass;
        let log_ratio = -0.5 * rel.ln_1p();
        let inner = |x: f64, anchor: f64| {
            let gx = self.g.value(x);
            let d = (-0.5 * self.r * (-self.g.tangent_gap(x, anchor) / gx).ln_1p() + log_ratio).exp_m1();
            gx.powf(-self.r) / self.base_mass * d * d
        };
        let inside = self.integrate_window(inner)?;
        let local_base = integrate_pieces(|x| self.g.value(x).powf(-self.r), &[a, mid, b], &local_scheme())?;
        let outside = (self.base_mass - local_base) / self.base_mass * log_ratio.exp_m1().powi(2);
        Ok(0.5 * (inside + outside))
    }
}

/// `c_ε` as `ε → 0` for `g(x) = g(m₀) + a(x − m₀)^k`: the root in `(1, 10)` of
/// `(1 − k)c^k + k c^{k−1} + 2k − 1`.
pub fn c_eps_limit(k: u32) -> Result<f64> {
    let kf = k as f64;
    bisect(|c| (1.0 - kf) * c.powi(k as i32) + kf * c.powi(k as i32 - 1) + 2.0 * kf - 1.0, 1.0, 10.0, "limit of c_eps")
}

/// `½ ∫ (√f₁ − √f₂)²` over the joint effective support around `breaks`, which
/// should include every discontinuity of either density.
pub fn hellinger_sq(
    f1: &(dyn Fn(f64) -> f64 + Sync),
    f2: &(dyn Fn(f64) -> f64 + Sync),
    breaks: &[f64],
    scheme: &QuadScheme,
) -> Result<f64> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("hellinger breakpoints must be increasing, at least two".into()));
    }
    let (lo, hi) = effective_support(&[f1, f2], breaks[0], breaks[breaks.len() - 1], scheme.tail_cutoff);
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    if lo < breaks[0] {
        pts.push(lo);
    }
    pts.extend_from_slice(breaks);
    if hi > breaks[breaks.len() - 1] {
        pts.push(hi);
    }
    let d = |x: f64| {
        let v = f1(x).max(0.0).sqrt() - f2(x).max(0.0).sqrt();
        v * v
    };
    // pieces are evaluated from the inside so jumps at breakpoints are harmless
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0].next_up(), w[1].next_down());
        total += integrate(|x| d(x.clamp(a, b)), w[0], w[1], scheme)?;
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionFit {
    pub epsilons: Vec<f64>,
    /// Observed quantity divided by `ε^p` and the analytic scale.
    pub ratios: Vec<f64>,
    /// Intercept of `ratio ≈ a + bε`, the leading coefficient estimate.
    pub fitted: f64,
    pub analytic: f64,
    /// Slope of `ln(observed)` against `ln ε`.
    pub loglog_slope: f64,
}

impl ExpansionFit {
    pub fn relative_error(&self) -> f64 {
        (self.fitted - self.analytic).abs() / self.analytic.abs()
    }
}

fn kth_derivative<G: Profile>(g: &G, k: u32, m0: f64) -> Result<f64> {
    g.kth_derivative(k, m0)
        .filter(|v| v.is_finite() && *v > 0.0)
        .ok_or_else(|| Error::InvalidParameter(format!("g^({k})(m0) must be known and positive")))
}

fn expansion_fit(epsilons: &[f64], observed: &[f64], power: f64, scale: f64, analytic: f64) -> Result<ExpansionFit> {
    if epsilons.len() < 3 || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::IllConditioned("need at least three strictly decreasing epsilons".into()));
    }
    let ratios: Vec<f64> = epsilons.iter().zip(observed).map(|(e, o)| o / (scale * e.powf(power))).collect();
    let fitted = ols(epsilons, &ratios)?.intercept;
    let logs_e: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let logs_o: Vec<f64> = observed.iter().map(|o| o.abs().ln()).collect();
    let loglog_slope = ols(&logs_e, &logs_o)?.slope;
    Ok(ExpansionFit { epsilons: epsilons.to_vec(), ratios, fitted, analytic, loglog_slope })
}

/// Relative excess mass of `f̃_ε` against `ε^{k+1}`, scaled by `r g^{(k)}(m₀) / g(m₀)^{r+1}`
/// for a normalized `f`; the fitted coefficient estimates `π_k`.
pub fn total_mass_expansion<G: Profile + Clone>(g: &G, m0: f64, k: u32, r: f64, eps_list: &[f64]) -> Result<ExpansionFit> {
    let gk = kth_derivative(g, k, m0)?;
    let mut observed = Vec::with_capacity(eps_list.len());
    let mut base_mass = f64::NAN;
    for &eps in eps_list {
        let p = build_perturbation(g.clone(), m0, eps, k, r)?;
        base_mass = p.base_mass();
        observed.push(p.relative_mass_excess());
    }
    // rescaling g so that ∫ g^{−r} = 1 multiplies the coefficient by 1/∫ g^{−r}
    let scale = r * gk / g.value(m0).powf(r + 1.0) / base_mass;
    expansion_fit(eps_list, &observed, k as f64 + 1.0, scale, pi_k(k))
}

/// `h²(f_ε, f)` against `ε^{2k+1}`, scaled by `r² f(m₀) g^{(k)}(m₀)² / g(m₀)²`;
/// the fitted coefficient estimates `ζ_k`.
pub fn hellinger_expansion<G: Profile + Clone>(g: &G, m0: f64, k: u32, r: f64, eps_list: &[f64]) -> Result<ExpansionFit> {
    let gk = kth_derivative(g, k, m0)?;
    let mut observed = Vec::with_capacity(eps_list.len());
    let mut f_m0 = f64::NAN;
    for &eps in eps_list {
        let p = build_perturbation(g.clone(), m0, eps, k, r)?;
        f_m0 = p.base_density(m0);
        observed.push(p.hellinger_sq_to_base()?);
    }
    let scale = r * r * f_m0 * gk * gk / g.value(m0).powi(2);
    expansion_fit(eps_list, &observed, 2.0 * k as f64 + 1.0, scale, zeta_k(k))
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn pow3(e: u32) -> BigInt {
    num_traits::pow(big(3), e as usize)
}

fn factorial(n: u32) -> BigInt {
    (1..=n as i64).fold(BigInt::one(), |acc, v| acc * v)
}

fn check_k(k: u32) {
    assert!(k >= 2 && k.is_multiple_of(2), "k must be an even integer >= 2, got {k}");
}

/// `π_k = [3^{k−1}(2k² − 4k + 3) + 2k² − 1] / (k+1)!`.
pub fn pi_k_exact(k: u32) -> BigRational {
    check_k(k);
    let ki = k as i64;
    let num = pow3(k - 1) * big(2 * ki * ki - 4 * ki + 3) + big(2 * ki * ki - 1);
    BigRational::new(num, factorial(k + 1))
}

/// First (left-window) part of `ζ_k`.
pub fn zeta_k_left_exact(k: u32) -> BigRational {
    check_k(k);
    let ki = k as i64;
    let kf2 = factorial(k).pow(2);
    let first = big(-4) * pow3(k + 2) * big(2 * ki + 1) * (pow3(k + 2) + big(ki * ki + ki - 3));
    let inner = big(27) * (pow3(2 * k + 1) - big(1)) + big(2) * pow3(2 * k) * big(2 * ki + 1) * big(2 * ki * (2 * ki - 9) + 27);
    let second = big((ki + 1) * (ki + 2)) * inner;
    let den = big(108) * kf2 * big((ki + 1) * (ki + 2) * (2 * ki + 1));
    BigRational::new(first + second, den)
}

/// Second (centre-window) part of `ζ_k`, `2k²(2k²+1) / (3(k!)²(k+1)(2k+1))`.
pub fn zeta_k_center_exact(k: u32) -> BigRational {
    check_k(k);
    let ki = k as i64;
    let den = big(3) * factorial(k).pow(2) * big((ki + 1) * (2 * ki + 1));
    BigRational::new(big(2 * ki * ki * (2 * ki * ki + 1)), den)
}

pub fn zeta_k_exact(k: u32) -> BigRational {
    zeta_k_left_exact(k) + zeta_k_center_exact(k)
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn pi_k(k: u32) -> f64 {
    to_f64(&pi_k_exact(k))
}

pub fn zeta_k(k: u32) -> f64 {
    to_f64(&zeta_k_exact(k))
}

/// `ρ_k = (2(2k+1)ζ_k)^{−1/(2k+1)} / 4`.
pub fn rho_k(k: u32) -> f64 {
    let m = 2.0 * k as f64 + 1.0;
    (2.0 * m * zeta_k(k)).powf(-1.0 / m) / 4.0
}

/// `(c/4)·exp(−2ζγ c^{2k+1})`, the two-point lower bound as a function of `c`.
pub fn mode_risk_bound(c: f64, k: u32, zeta: f64, gamma: f64) -> f64 {
    c / 4.0 * (-2.0 * zeta * gamma * c.powi(2 * k as i32 + 1)).exp()
}

/// Maximizer of [`mode_risk_bound`] with `ζ = ζ_k`, located numerically by bisection
/// on the derivative of its logarithm.
pub fn mode_risk_argmax(k: u32, gamma: f64) -> Result<f64> {
    let zeta = zeta_k(k);
    let m = 2 * k as i32 + 1;
    let dlog = |c: f64| 1.0 / c - 2.0 * m as f64 * zeta * gamma * c.powi(m - 1);
    let mut hi = 1.0;
    while dlog(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootFinding("risk bound has no interior maximum".into()));
        }
    }
    bisect(dlog, 1e-12, hi, "risk bound maximizer")
}

/// Uniform `[0, w]` density, a convenience for Hellinger checks.
pub fn uniform_density(w: f64) -> impl Fn(f64) -> f64 + Sync {
    move |x| if (0.0..=w).contains(&x) { 1.0 / w } else { 0.0 }
}

/// `∫ f` over the same breakpoints and tails used by [`hellinger_sq`].
pub fn total_mass(f: &(dyn Fn(f64) -> f64 + Sync), breaks: &[f64], scheme: &QuadScheme) -> Result<f64> {
    let lo = breaks[0];
    let hi = breaks[breaks.len() - 1];
    Ok(integrate_lower_tail(f, lo, scheme)? + integrate_pieces(f, breaks, scheme)? + integrate_upper_tail(f, hi, scheme)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> PowerProfile {
        PowerProfile::new(1.0, 1.0, 0.0, 2).unwrap()
    }

    #[test]
    fn c_eps_quadratic_is_three() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let p = build_perturbation(quadratic(), 0.0, eps, 2, 2.0).unwrap();
            assert!((p.c_eps() - 3.0).abs() < 1e-6, "eps={eps}: {}", p.c_eps());
        }
    }

    #[test]
    fn c_eps_limit_values() {
        assert!((c_eps_limit(2).unwrap() - 3.0).abs() < 1e-12);
        let c4 = c_eps_limit(4).unwrap();
        assert!((-3.0 * c4.powi(4) + 4.0 * c4.powi(3) + 7.0).abs() < 1e-10);
        assert!((c4 - 1.7608).abs() < 1e-3);
    }

    #[test]
    fn junctions_continuous() {
        let p = build_perturbation(quadratic(), 0.3, 0.01, 2, 2.5).unwrap();
        let (j1, j2) = p.junction_gaps();
        assert!(j1.abs() < 1e-10 && j2.abs() < 1e-10);
        assert!(p.convexity_defect().is_none());
    }

    #[test]
    fn tangent_gap_matches_direct() {
        let g = PowerProfile::new(2.0, 0.5, 0.3, 6).unwrap();
        for (x, a) in [(1.0, -0.4), (-0.2, 0.9), (0.3, 0.3)] {
            let direct = g.value(x) - g.value(a) - (x - a) * g.derivative(a);
            assert!((g.tangent_gap(x, a) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_rationals() {
        assert_eq!(pi_k_exact(2), BigRational::new(big(8), big(3)));
        assert_eq!(zeta_k_center_exact(2), BigRational::new(big(2), big(5)));
        assert!(zeta_k(2) > 0.0 && zeta_k(4) > 0.0);
    }

    #[test]
    fn hellinger_uniform() {
        let f1 = uniform_density(1.0);
        let f2 = uniform_density(2.0);
        let h = hellinger_sq(&f1, &f2, &[0.0, 1.0, 2.0], &QuadScheme::default()).unwrap();
        assert!((h - (1.0 - 0.5f64.sqrt())).abs() < 1e-10);
        let same = hellinger_sq(&f1, &f1, &[0.0, 1.0], &QuadScheme::default()).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(build_perturbation(quadratic(), 0.0, 0.01, 3, 2.0).is_err());
        assert!(build_perturbation(quadratic(), 0.0, -0.01, 2, 2.0).is_err());
    }
}

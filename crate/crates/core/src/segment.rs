//! Moments of `t ↦ ψ(u + t(v − u))` over `t ∈ [0, 1]` for the two integrands the
//! estimators need: a negative power `φ^q` and `exp(−φ)`.
//!
//! Every objective value, gradient, Hessian, CDF and characterization residual is
//! assembled from these per-segment quantities, so the whole pipeline is exact up
//! to rounding. Near-constant segments go through a midpoint series; otherwise the
//! segment is oriented so its small end sits at `t = 0` and an integration-by-parts
//! recursion is run from the expm1-based zeroth moment.

/// Series is used when `|δ|·(|q| + i + 2)` is below this, `δ = (v−u)/(v+u)`.
const SERIES_RADIUS: f64 = 0.3;
const MAX_SERIES_TERMS: usize = 80;

fn binomial_coeffs(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n + 1 - k) as f64 / k as f64;
    }
    row
}

/// `∫₀¹ φ(t)^q dt` for `φ` linear from `u` to `v`, both positive.
pub fn power_mean(u: f64, v: f64, q: f64) -> f64 {
    debug_assert!(u > 0.0 && v > 0.0);
    let lambda = (v / u).ln();
    if lambda == 0.0 {
        return u.powf(q);
    }
    let em1 = lambda.exp_m1();
    if q == -1.0 {
        return lambda / (u * em1);
    }
    let a = q + 1.0;
    u.powf(q) * (a * lambda).exp_m1() / (a * em1)
}

/// Midpoint series `∫₀¹ t^i φ^q dt = m^q Σ_j C(q,j) δ^j c_{ij}`.
fn power_moment_series(i: usize, q: f64, u: f64, v: f64) -> f64 {
    let m = 0.5 * (u + v);
    let delta = (v - u) / (v + u);
    let binom_i = binomial_coeffs(i);
    let scale = 0.5f64.powi(i as i32);
    let mut sum = 0.0;
    let mut coeff = 1.0; // C(q, j) δ^j
    for j in 0..MAX_SERIES_TERMS {
        let mut c = 0.0;
        for (k, b) in binom_i.iter().enumerate() {
            if (k + j) % 2 == 0 {
                c += b / (k + j + 1) as f64;
            }
        }
        sum += coeff * c * scale;
        // |c·scale| ≤ 1 and odd-order terms can vanish, so bound by the coefficient
        if j > 2 && coeff.abs() <= 1e-18 * sum.abs() {
            break;
        }
        coeff *= (q - j as f64) / (j + 1) as f64 * delta;
    }
    m.powf(q) * sum
}

/// `∫₀¹ t^i /φ dt` by binomial expansion; only reachable for `q = −1`, `i ≥ 1`.
fn reciprocal_moment(i: usize, u: f64, v: f64) -> f64 {
    let d = v - u;
    let lambda = (v / u).ln();
    let binom = binomial_coeffs(i);
    let mut acc = (-u).powi(i as i32) * lambda;
    for k in 1..=i {
        acc += binom[k] * (-u).powi((i - k) as i32) * (v.powi(k as i32) - u.powi(k as i32)) / k as f64;
    }
    acc / d.powi(i as i32 + 1)
}

/// `∫₀¹ t^i φ(t)^q dt` with no orientation handling.
fn power_moment_direct(i: usize, q: f64, u: f64, v: f64) -> f64 {
    let delta = (v - u) / (v + u);
    if delta.abs() * (q.abs() + i as f64 + 2.0) <= SERIES_RADIUS {
        return power_moment_series(i, q, u, v);
    }
    if i == 0 {
        return power_mean(u, v, q);
    }
    if q == -1.0 {
        return reciprocal_moment(i, u, v);
    }
    let a = q + 1.0;
    let lower = power_moment_direct(i - 1, a, u, v);
    (v.powf(a) - i as f64 * lower) / (a * (v - u))
}

/// `[∫₀¹ t^i φ(t)^q dt]_{i<N}` for `φ` linear from `u` to `v`, both positive.
pub fn power_moments<const N: usize>(u: f64, v: f64, q: f64) -> [f64; N] {
    let mut out = [0.0; N];
    if u <= v {
        for (i, o) in out.iter_mut().enumerate() {
            *o = power_moment_direct(i, q, u, v);
        }
    } else {
        let mut rev = [0.0; N];
        for (i, o) in rev.iter_mut().enumerate() {
            *o = power_moment_direct(i, q, v, u);
        }
        flip_moments(&rev, &mut out);
    }
    out
}

/// Single moment of arbitrary order, same orientation rules as [`power_moments`].
pub fn power_moment(i: usize, q: f64, u: f64, v: f64) -> f64 {
    if u <= v {
        power_moment_direct(i, q, u, v)
    } else {
        let rev: Vec<f64> = (0..=i).map(|k| power_moment_direct(k, q, v, u)).collect();
        flip_one(&rev, i)
    }
}

/// `∫₀¹ t^i e^{−td} dt`.
fn exp_unit_moment(i: usize, d: f64) -> f64 {
    if d.abs() < 1.0 {
        let mut sum = 0.0;
        let mut coeff = 1.0; // (−d)^k / k!
        for k in 0..MAX_SERIES_TERMS {
            let term = coeff / (k + i + 1) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coeff *= -d / (k + 1) as f64;
        }
        return sum;
    }
    let emd = (-d).exp();
    let mut e = -(-d).exp_m1() / d;
    for k in 1..=i {
        e = (k as f64 * e - emd) / d;
    }
    e
}

fn exp_moment_direct(i: usize, u: f64, v: f64) -> f64 {
    (-u).exp() * exp_unit_moment(i, v - u)
}

/// `[∫₀¹ t^i e^{−φ(t)} dt]_{i<N}` for `φ` linear from `u` to `v`.
pub fn exp_moments<const N: usize>(u: f64, v: f64) -> [f64; N] {
    let mut out = [0.0; N];
    if u <= v {
        for (i, o) in out.iter_mut().enumerate() {
            *o = exp_moment_direct(i, u, v);
        }
    } else {
        let mut rev = [0.0; N];
        for (i, o) in rev.iter_mut().enumerate() {
            *o = exp_moment_direct(i, v, u);
        }
        flip_moments(&rev, &mut out);
    }
    out
}

pub fn exp_moment(i: usize, u: f64, v: f64) -> f64 {
    if u <= v {
        exp_moment_direct(i, u, v)
    } else {
        let rev: Vec<f64> = (0..=i).map(|k| exp_moment_direct(k, v, u)).collect();
        flip_one(&rev, i)
    }
}

/// Converts moments in `t` into moments in `1 − t`.
fn flip_moments(rev: &[f64], out: &mut [f64]) {
    for i in 0..out.len() {
        out[i] = flip_one(rev, i);
    }
}

fn flip_one(rev: &[f64], i: usize) -> f64 {
    let binom = binomial_coeffs(i);
    let mut acc = 0.0;
    for k in 0..=i {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom[k] * rev[k];
    }
    acc
}

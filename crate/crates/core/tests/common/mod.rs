//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renyi_scd::analytic::{Law, QTauFamily, StandardNormal};
use renyi_scd::SortedSample;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite five-point Gauss–Legendre on `panels` equal panels.
pub fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(t, w)| w * f(mid + 0.5 * h * t)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `∫_a^∞ f` via `x = a + t/(1−t)`.
pub fn gauss_upper(f: impl Fn(f64) -> f64, a: f64, panels: usize) -> f64 {
    gauss(|t| f(a + t / (1.0 - t)) / (1.0 - t).powi(2), 0.0, 1.0, panels)
}

/// `∫_{−∞}^b f`.
pub fn gauss_lower(f: impl Fn(f64) -> f64, b: f64, panels: usize) -> f64 {
    gauss_upper(|x| f(-x), -b, panels)
}

/// Gauss–Legendre over consecutive breakpoints.
pub fn gauss_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], panels: usize) -> f64 {
    breaks.windows(2).map(|w| gauss(&f, w[0], w[1], panels)).sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn qtau_sample(tau: f64, n: usize, seed: u64) -> SortedSample {
    let law = QTauFamily::new(tau).unwrap();
    SortedSample::new(&law.sample(&mut rng(seed), n)).unwrap()
}

pub fn normal_sample(n: usize, seed: u64) -> SortedSample {
    SortedSample::new(&StandardNormal::default().sample(&mut rng(seed), n)).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Relative sup-norm distance `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_sup(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(floor, f64::max);
    num / den
}

/// Log-concave MLE by accelerated projected gradient over `(g₀, slope₀, slope changes ≥ 0)`;
/// returns `(objective, g at the sample points)`.
pub fn reference_logconcave(sample: &SortedSample, iters: usize) -> (f64, Vec<f64>) {
    let x = sample.points();
    let w = sample.weights();
    let n = x.len();
    let build = |p: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut v = p[0] + p[1] * (x[i] - x[0]);
                for j in 1..i {
                    v += p[j + 1] * (x[i] - x[j]);
                }
                v
            })
            .collect()
    };
    let seg = |u: f64, v: f64| gauss(|t| (-(u + t * (v - u))).exp(), 0.0, 1.0, 4);
    let value = |g: &[f64]| -> f64 {
        let lin: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        lin + (0..n - 1).map(|i| (x[i + 1] - x[i]) * seg(g[i], g[i + 1])).sum::<f64>()
    };
    let grad_g = |g: &[f64]| -> Vec<f64> {
        let mut d = w.to_vec();
        for i in 0..n - 1 {
            let len = x[i + 1] - x[i];
            let (u, v) = (g[i], g[i + 1]);
            d[i] -= len * gauss(|t| (1.0 - t) * (-(u + t * (v - u))).exp(), 0.0, 1.0, 4);
            d[i + 1] -= len * gauss(|t| t * (-(u + t * (v - u))).exp(), 0.0, 1.0, 4);
        }
        d
    };
    let grad_p = |dg: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[0] += dg[i];
            out[1] += dg[i] * (x[i] - x[0]);
            for j in 1..i {
                out[j + 1] += dg[i] * (x[i] - x[j]);
            }
        }
        out
    };
    let project = |p: &mut [f64]| {
        for v in p.iter_mut().skip(2) {
            *v = v.max(0.0);
        }
    };
    let range = x[n - 1] - x[0];
    let mut p = vec![0.0; n];
    p[0] = range.ln();
    let mut y = p.clone();
    let mut t_prev: f64 = 1.0;
    let mut step = 1.0;
    let mut f_p = value(&build(&p));
    for _ in 0..iters {
        let gy = build(&y);
        let fy = value(&gy);
        let gr = grad_p(&grad_g(&gy));
        let cand = loop {
            let mut c: Vec<f64> = y.iter().zip(&gr).map(|(a, b)| a - step * b).collect();
            project(&mut c);
            let diff: Vec<f64> = c.iter().zip(&y).map(|(a, b)| a - b).collect();
            let quad = fy + diff.iter().zip(&gr).map(|(a, b)| a * b).sum::<f64>()
                + diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            if value(&build(&c)) <= quad + 1e-15 || step < 1e-14 {
                break c;
            }
            step *= 0.5;
        };
        let f_c = value(&build(&cand));
        // restart momentum when the objective goes up
        let (t_next, restart) = if f_c > f_p { (1.0, true) } else { ((1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt()) / 2.0, false) };
        let mom = if restart { 0.0 } else { (t_prev - 1.0) / t_next };
        y = cand.iter().zip(&p).map(|(c, o)| c + mom * (c - o)).collect();
        if restart {
            y = p.clone();
        } else {
            p = cand;
            f_p = f_c;
        }
        t_prev = t_next;
        step *= 1.1;
    }
    (f_p, build(&p))
}

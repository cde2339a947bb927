//! Acceptance criteria, one line each. Exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use renyi_scd::analytic::{renyi_projection, QTauFamily};
use renyi_scd::certify::{characterization_residuals, knot_bracket_check, population_projection_check};
use renyi_scd::experiments::{
    continuity_study, mode_rate_study, off_model_projection_study, pointwise_rate_study, ExperimentSpec, RateResult,
};
use renyi_scd::objective::{eval_objective, objective_gradient, objective_hessian};
use renyi_scd::perturb::{hellinger_expansion, mode_risk_argmax, rho_k, total_mass_expansion, PowerProfile};
use renyi_scd::quad::QuadScheme;
use renyi_scd::{fit_renyi, fit_renyi_from, DensityFit, PiecewiseLinear, RenyiIndex, SolverOptions, SortedSample};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> ExperimentSpec {
    let path = format!("{}/../../configs/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    ExperimentSpec::from_toml_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

/// The 20 seeded `(n, s)` cells shared by the first two criteria.
fn certificate_fits() -> Vec<(SortedSample, DensityFit, f64)> {
    let ns = [50, 200, 1000];
    let ss = [-0.2, -1.0 / 3.0, -0.45];
    (0..20)
        .map(|i| {
            let sample = common::qtau_sample(3.0, ns[i % 3], 9000 + i as u64);
            let s = ss[(i / 3) % 3];
            let (fit, _) = fit_renyi(&sample, RenyiIndex::new(s).unwrap(), &SolverOptions::default()).unwrap();
            (sample, fit, s)
        })
        .collect()
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let fits = certificate_fits();
    let mut worst_ratio: f64 = 0.0;
    let mut failures = 0;
    for (sample, fit, _) in &fits {
        let tol = 1e-7 * sample.range();
        let rep = characterization_residuals(fit, sample, tol).unwrap();
        let brackets = knot_bracket_check(fit, sample, tol).unwrap();
        let knot_worst = rep.knot_equality_residuals.iter().map(|k| k.residual.abs()).fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(rep.max_positive_violation.max(knot_worst) / tol);
        if !rep.pass || brackets.iter().any(|b| !b.satisfied) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && within(elapsed, 120),
        format!("{failures}/20 fits fail; worst residual/tol {worst_ratio:.2e}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn ac2() -> Outcome {
    let fits = certificate_fits();
    let mut mass_dev: f64 = 0.0;
    let mut mean_ratio: f64 = 0.0;
    for (sample, fit, _) in &fits {
        mass_dev = mass_dev.max((fit.total_mass() - 1.0).abs());
        mean_ratio = mean_ratio.max((fit.mean() - sample.mean()).abs() / sample.range());
    }
    outcome(
        mass_dev <= 1e-6 && mean_ratio <= 1e-6,
        format!("max |mass - 1| {mass_dev:.2e}; max |mean_P - mean_Q|/range {mean_ratio:.2e}"),
    )
}

fn ac3() -> Outcome {
    let opts = SolverOptions::default();
    let idx = RenyiIndex::new(-1.0 / 3.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let sample = common::qtau_sample(3.0, 200, 7000 + seed);
        let (a, _) = fit_renyi(&sample, idx, &opts).unwrap();
        let level = a.g().values().iter().sum::<f64>() / sample.len() as f64;
        let init: Vec<f64> = sample.points().iter().map(|x| 3.0 * level + 0.1 * x * x + 0.05 * x).collect();
        let (b, _) = fit_renyi_from(&sample, idx, &opts, &init).unwrap();
        for (u, v) in a.g().values().iter().zip(b.g().values()) {
            worst = worst.max((u - v).abs() / u.abs());
        }
    }
    outcome(worst <= 1e-6, format!("max relative knot difference {worst:.2e} over 10 seeds"))
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(4);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(4..40);
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let sample = SortedSample::new(&data).unwrap();
        let s: f64 = rng.random_range(-0.9..-0.05);
        let (center, level, curv, tilt): (f64, f64, f64, f64) =
            (rng.random_range(-1.0..1.0), rng.random_range(0.3..3.0), rng.random_range(0.01..1.0), rng.random_range(-0.2..0.2));
        let lift = tilt * tilt / (4.0 * curv);
        let vals = sample.points().iter().map(|x| level + lift + tilt * (x - center) + curv * (x - center).powi(2)).collect();
        let g = PiecewiseLinear::new(sample.points().to_vec(), vals).unwrap();
        let idx = RenyiIndex::new(s).unwrap();
        let h = 1e-6 * g.scale();
        let shifted = |i: usize, d: f64| {
            let mut v = g.values().to_vec();
            v[i] += d;
            PiecewiseLinear::new(g.knots().to_vec(), v).unwrap()
        };
        let grad = objective_gradient(&g, &sample, idx).unwrap();
        let fd: Vec<f64> = (0..g.len())
            .map(|i| {
                (eval_objective(&shifted(i, h), &sample, idx).unwrap() - eval_objective(&shifted(i, -h), &sample, idx).unwrap())
                    / (2.0 * h)
            })
            .collect();
        worst_g = worst_g.max(common::rel_sup(&fd, &grad, 1e-3));
        let hess = objective_hessian(&g, &sample, idx).unwrap();
        for i in 0..g.len() {
            let mut e = vec![0.0; g.len()];
            e[i] = 1.0;
            let col = hess.mul_vec(&e);
            let up = objective_gradient(&shifted(i, h), &sample, idx).unwrap();
            let dn = objective_gradient(&shifted(i, -h), &sample, idx).unwrap();
            let fd: Vec<f64> = up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            worst_h = worst_h.max(common::rel_sup(&fd, &col, 1e-3));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_g <= 1e-5 && worst_h <= 1e-4 && within(elapsed, 30),
        format!("gradient rel err {worst_g:.2e}, Hessian rel err {worst_h:.2e} on 100 points; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (0..4001).map(|i| -20.0 + 40.0 * i as f64 / 4000.0).collect();
    let step = grid[1] - grid[0];
    let mut notes = Vec::new();
    let mut pass = true;
    for (tau, s) in [(3.0, -0.25), (4.0, -1.0 / 3.0), (3.0, -0.3)] {
        let target = QTauFamily::new(tau).unwrap();
        let cand = renyi_projection(tau, s).unwrap();
        let rep = population_projection_check(&target, &cand, s, &grid, 1e-8, &QuadScheme::default()).unwrap();
        let at_zero = rep.equality_points.iter().any(|x| x.abs() <= step);
        let ok = rep.pass && at_zero;
        pass &= ok;
        notes.push(format!("(τ={tau}, s={s:.4}) → q_{:.4} max {:.1e}", cand.tau(), rep.max_residual));
    }
    let study = off_model_projection_study(&config("projection")).unwrap();
    let medians = study.metrics[0].medians();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    pass &= decreasing;
    let elapsed = start.elapsed();
    pass &= within(elapsed, 600);
    outcome(
        pass,
        format!(
            "{}; empirical medians {:?}; {:.1}s",
            notes.join(", "),
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

fn ac6() -> Outcome {
    let study = continuity_study(&config("continuity")).unwrap();
    let monotone = study.sweeps.iter().filter(|s| s.strictly_decreasing_tail(4)).count();
    let finals: Vec<f64> = study.sweeps.iter().map(|s| *s.weighted_l1.last().unwrap()).collect();
    let worst = finals.iter().copied().fold(0.0, f64::max);
    outcome(
        monotone == study.sweeps.len() && worst <= 5e-2,
        format!("{monotone}/{} seeds strictly decreasing; largest final distance {worst:.2e} (threshold 5e-2)", study.sweeps.len()),
    )
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let q = PowerProfile::new(1.0, 1.0, 0.0, 2).unwrap();
    let pi = total_mass_expansion(&q, 0.0, 2, 2.0, &[0.04, 0.02, 0.01, 0.005, 0.0025]).unwrap();
    let zeta = hellinger_expansion(&q, 0.0, 2, 2.0, &[0.02, 0.01, 0.005, 0.0025, 0.00125]).unwrap();
    let mut rho_err: f64 = 0.0;
    for k in [2, 4] {
        let c = mode_risk_argmax(k, 1.0).unwrap();
        rho_err = rho_err.max((4.0 * rho_k(k) - c).abs() / c);
    }
    let elapsed = start.elapsed();
    outcome(
        pi.relative_error() <= 0.03 && zeta.relative_error() <= 0.03 && rho_err <= 1e-8 && within(elapsed, 60),
        format!(
            "pi_2 closed {:.5} vs regression {:.5} ({:.2}%); zeta_2 closed {:.5} vs regression {:.5} ({:.2}%); rho identity err {rho_err:.1e}",
            pi.analytic,
            pi.fitted,
            100.0 * pi.relative_error(),
            zeta.analytic,
            zeta.fitted,
            100.0 * zeta.relative_error()
        ),
    )
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let pointwise = pointwise_rate_study(&config("pointwise")).unwrap();
    let mode = mode_rate_study(&config("mode")).unwrap();
    let density = pointwise.metrics.iter().find(|m| m.name.starts_with("density@")).unwrap().slope();
    let derivative = pointwise.metrics.iter().find(|m| m.name.starts_with("derivative@")).unwrap().slope();
    let mode_slope = mode.metric("mode_abs").unwrap().slope();
    let elapsed = start.elapsed();
    outcome(
        (density + 0.4).abs() <= 0.15 && (mode_slope + 0.2).abs() <= 0.2,
        format!(
            "density slope {density:.3} (target -0.4 ± 0.15); mode slope {mode_slope:.3} (target -0.2 ± 0.2); derivative slope {derivative:.3}; failures {:.1}%/{:.1}%; {:.1}s",
            100.0 * pointwise.failure_rate,
            100.0 * mode.failure_rate,
            elapsed.as_secs_f64()
        ),
    )
}

fn bytes(r: &RateResult) -> Vec<u8> {
    let mut out = Vec::new();
    r.write_csv(&mut out).unwrap();
    out.extend(r.summary_json().unwrap().into_bytes());
    out
}

fn ac9() -> Outcome {
    let mut identical = 0;
    let mut total = 0;
    let shrink = |mut spec: ExperimentSpec, threads: usize| {
        spec.n_grid.truncate(2);
        spec.replicates = spec.replicates.min(4);
        spec.parallelism = Some(threads);
        spec
    };
    type Study = fn(&ExperimentSpec) -> renyi_scd::Result<RateResult>;
    let studies: [(&str, Study); 3] =
        [("pointwise", pointwise_rate_study), ("mode", mode_rate_study), ("projection", off_model_projection_study)];
    for (name, run) in studies {
        let serial = bytes(&run(&shrink(config(name), 1)).unwrap());
        let again = bytes(&run(&shrink(config(name), 1)).unwrap());
        let parallel = bytes(&run(&shrink(config(name), 4)).unwrap());
        total += 2;
        identical += (serial == again) as usize + (serial == parallel) as usize;
    }
    let cont = |threads| {
        let mut spec = config("continuity");
        spec.parallelism = Some(threads);
        let mut out = Vec::new();
        continuity_study(&spec).unwrap().write_csv(&mut out).unwrap();
        out
    };
    let (a, b, c) = (cont(1), cont(1), cont(4));
    total += 2;
    identical += (a == b) as usize + (a == c) as usize;
    outcome(identical == total, format!("{identical}/{total} re-run and thread-count comparisons byte-identical"))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("AC1", "characterization certificate", ac1),
        ("AC2", "normalization and moment identity", ac2),
        ("AC3", "uniqueness across initializations", ac3),
        ("AC4", "gradient and Hessian correctness", ac4),
        ("AC5", "q_tau projection", ac5),
        ("AC6", "continuity in s", ac6),
        ("AC7", "perturbation constants", ac7),
        ("AC8", "rate slopes", ac8),
        ("AC9", "determinism", ac9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        failed += !result.pass as usize;
        println!("{id} {name} ... {verdict} ({})", result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

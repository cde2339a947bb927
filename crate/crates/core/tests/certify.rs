mod common;

use std::sync::Arc;

use common::{normal_sample, qtau_sample};
use renyi_scd::analytic::{renyi_projection_oracle, QTauFamily};
use renyi_scd::certify::{
    characterization_residuals, convex_order_check, knot_bracket_check, moment_checks, population_projection_check,
    ConvexTest,
};
use renyi_scd::quad::QuadScheme;
use renyi_scd::{fit_renyi, DensityFit, PlConvexFn, RenyiIndex, SolverOptions, SortedSample};

fn fitted(sample: &SortedSample, s: f64) -> DensityFit {
    fit_renyi(sample, RenyiIndex::new(s).unwrap(), &SolverOptions::default()).unwrap().0
}

/// Scales every knot value of `g`; changing a single value by 1% breaks convexity
/// because the fitted kinks are far smaller than that.
fn corrupt(fit: &DensityFit, sample: &SortedSample, factor: f64) -> DensityFit {
    let v: Vec<f64> = fit.g().values().iter().map(|v| v * factor).collect();
    let g = PlConvexFn::new(sample.points().to_vec(), v).unwrap();
    DensityFit::new(g, fit.shape(), sample).unwrap()
}

#[test]
fn single_value_tamper_is_not_convex() {
    let sample = qtau_sample(3.0, 200, 3);
    let fit = fitted(&sample, -1.0 / 3.0);
    let j = fit.knot_indices()[fit.knot_indices().len() / 2];
    let mut v = fit.g().values().to_vec();
    v[j] *= 1.01;
    assert!(PlConvexFn::new(sample.points().to_vec(), v).is_err());
}

#[test]
fn solver_output_is_certified() {
    for seed in 0..5 {
        let sample = qtau_sample(3.0, 150, seed);
        let fit = fitted(&sample, -0.4);
        let tol = 1e-7 * sample.range();
        let rep = characterization_residuals(&fit, &sample, tol).unwrap();
        assert!(rep.pass, "seed {seed}: {}", rep.max_positive_violation);
        assert!(rep.bracket_violations.is_empty());
        assert!(knot_bracket_check(&fit, &sample, tol).unwrap().iter().all(|b| b.satisfied));
    }
}

#[test]
fn inflated_knot_fails_certificate() {
    let sample = qtau_sample(3.0, 200, 3);
    let fit = fitted(&sample, -1.0 / 3.0);
    let bad = corrupt(&fit, &sample, 1.01);
    let tol = 1e-7 * sample.range();
    let rep = characterization_residuals(&bad, &sample, tol).unwrap();
    assert!(!rep.pass);
    let worst_knot = rep.knot_equality_residuals.iter().map(|k| k.residual.abs()).fold(0.0, f64::max);
    assert!(rep.max_positive_violation > tol || worst_knot > tol);
}

#[test]
fn deflated_knot_breaks_a_bracket() {
    let sample = qtau_sample(3.0, 200, 3);
    let fit = fitted(&sample, -1.0 / 3.0);
    let bad = corrupt(&fit, &sample, 0.99);
    let tol = 1e-7 * sample.range();
    let rep = characterization_residuals(&bad, &sample, tol).unwrap();
    assert!(!rep.pass);
    assert!(rep.max_positive_violation > tol);
    assert!(knot_bracket_check(&bad, &sample, tol).unwrap().iter().any(|b| !b.satisfied));
}

#[test]
fn two_point_residual_closes() {
    let sample = SortedSample::new(&[0.0, 1.0]).unwrap();
    let fit = fitted(&sample, -0.5);
    let rep = characterization_residuals(&fit, &sample, 1e-9).unwrap();
    assert!(rep.residual_curve[1].abs() < 1e-12);
    let uniform = DensityFit::new(PlConvexFn::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap(), fit.shape(), &sample).unwrap();
    assert!((uniform.cdf(0.25) - 0.25).abs() < 1e-15);
    assert!(knot_bracket_check(&uniform, &sample, 1e-12).unwrap().iter().all(|b| b.satisfied));
}

#[test]
fn misaligned_fit_is_rejected() {
    let sample = SortedSample::new(&[0.0, 1.0, 2.0]).unwrap();
    let other = SortedSample::new(&[0.0, 1.5, 2.0]).unwrap();
    let fit = fitted(&sample, -0.5);
    assert!(characterization_residuals(&fit, &other, 1e-7).is_err());
}

#[test]
fn moment_identity_and_inequality() {
    for seed in 0..20 {
        let sample = normal_sample(120, 1000 + seed);
        let fit = fitted(&sample, -0.25);
        let rep = moment_checks(&fit, &sample, 2, 1e-9).unwrap();
        assert!(rep.mean_difference <= 1e-6, "seed {seed}: {rep:?}");
        assert!(rep.abs_moments[1].holds, "seed {seed}: {rep:?}");
    }
    let sample = qtau_sample(3.0, 50, 0);
    let fit = fitted(&sample, -0.45);
    assert!(moment_checks(&fit, &sample, 2, 1e-9).is_err());
}

#[test]
fn symmetric_sample_has_centred_fit() {
    let half: Vec<f64> = (1..=30).map(|i| (i as f64 * 0.37).sin().abs() * 2.0 + 0.01 * i as f64).collect();
    let data: Vec<f64> = half.iter().flat_map(|&x| [x, -x]).collect();
    let sample = SortedSample::new(&data).unwrap();
    let fit = fitted(&sample, -0.3);
    assert!(fit.mean().abs() < 1e-6 * sample.range());
}

#[test]
fn convex_order_holds() {
    let scheme = QuadScheme::default();
    let mut rng = common::rng(77);
    use rand::Rng;
    for seed in 0..20 {
        let sample = qtau_sample(3.0, 100, 500 + seed);
        let fit = fitted(&sample, -0.3);
        let mut tests = vec![ConvexTest::abs_dev(sample.median())];
        for _ in 0..10 {
            tests.push(ConvexTest::hinge(rng.random_range(sample.min()..sample.max())));
        }
        let tol = 1e-7 * sample.range();
        for (t, e) in tests.iter().zip(convex_order_check(&fit, &sample, &tests, tol, &scheme).unwrap()) {
            assert!(e.holds, "seed {seed}: {t:?} {e:?}");
        }
    }
}

#[test]
fn constant_and_smooth_tests() {
    let sample = qtau_sample(3.0, 80, 8);
    let fit = fitted(&sample, -0.3);
    let tests = [ConvexTest::constant(2.5), ConvexTest::Smooth(Arc::new(|x: f64| x * x))];
    let out = convex_order_check(&fit, &sample, &tests, 1e-7, &QuadScheme::default()).unwrap();
    assert!((out[0].fitted - out[0].empirical).abs() < 1e-6);
    assert!(out[1].holds);
    let square = common::gauss_pieces(|x| x * x * fit.density(x), sample.points(), 4);
    assert!((out[1].fitted - square).abs() < 1e-8 * square);
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn projection_example_holds() {
    let target = QTauFamily::new(3.0).unwrap();
    let candidate = renyi_projection_oracle(3.0, -0.25).unwrap();
    let g = grid(-20.0, 20.0, 4001);
    let rep = population_projection_check(&target, &candidate, -0.25, &g, 1e-8, &QuadScheme::default()).unwrap();
    assert!(rep.pass, "{}", rep.max_residual);
    assert!(rep.argmax.abs() <= 0.01);
    assert!(rep.equality_points.iter().all(|x| x.abs() <= 0.01), "{:?}", rep.equality_points);
}

#[test]
fn identical_laws_have_zero_residual() {
    let q = QTauFamily::new(3.5).unwrap();
    let rep = population_projection_check(&q, &q, -0.2, &grid(-10.0, 10.0, 201), 1e-12, &QuadScheme::default()).unwrap();
    assert!(rep.residuals.iter().all(|r| r.abs() < 1e-12));
    assert!(rep.total.abs() < 1e-12);
}

#[test]
fn wrong_direction_is_detected() {
    let target = QTauFamily::new(4.0).unwrap();
    let candidate = QTauFamily::new(3.0).unwrap();
    let rep =
        population_projection_check(&target, &candidate, -1.0 / 3.0, &grid(-20.0, 20.0, 801), 1e-8, &QuadScheme::default())
            .unwrap();
    assert!(!rep.pass);
    assert!(rep.max_residual > 1e-3);
}

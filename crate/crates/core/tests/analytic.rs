mod common;

use common::{gauss, gauss_lower, gauss_upper};
use renyi_scd::analytic::{
    moments_qtau, qtau_cdf, qtau_pdf, qtau_quantile, renyi_projection, renyi_projection_oracle, Law, QTauFamily, StudentT,
};
use renyi_scd::certify::population_projection_check;
use renyi_scd::model::check_s_concavity;
use renyi_scd::quad::QuadScheme;

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn qtau_point_values() {
    assert_eq!(qtau_pdf(3.0, 0.0).unwrap(), 1.0);
    for tau in [2.5, 3.0, 5.0] {
        assert_eq!(qtau_cdf(tau, 0.0).unwrap(), 0.5);
    }
    assert_eq!(qtau_quantile(3.0, 0.5).unwrap(), 0.0);
    assert!((qtau_quantile(3.0, 0.75).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    assert!(qtau_pdf(2.0, 0.0).is_err());
    assert!(qtau_quantile(3.0, 1.0).is_err());
}

#[test]
fn qtau_integrates_to_one() {
    let f = |x: f64| qtau_pdf(4.0, x).unwrap();
    let total = gauss_lower(f, 0.0, 400) + gauss_upper(f, 0.0, 400);
    assert!((total - 1.0).abs() < 1e-10, "{total}");
}

#[test]
fn quantile_round_trip() {
    for i in 1..=1000 {
        let p = i as f64 / 1001.0;
        let x = qtau_quantile(3.0, p).unwrap();
        assert!((qtau_cdf(3.0, x).unwrap() - p).abs() < 1e-12);
        assert!((qtau_quantile(3.0, 1.0 - p).unwrap() + x).abs() < 1e-12 * (1.0 + x.abs()));
    }
}

#[test]
fn absolute_moments() {
    assert_eq!(moments_qtau(3.0, 0.0).unwrap(), 1.0);
    assert!((moments_qtau(3.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    let oracle = 2.0 * gauss_upper(|x| x * x * qtau_pdf(4.0, x).unwrap(), 0.0, 2000);
    assert!((moments_qtau(4.0, 2.0).unwrap() - oracle).abs() < 1e-9, "{oracle}");
    assert!(moments_qtau(3.0, 2.0).is_err());
}

#[test]
fn projection_oracle_members() {
    assert_eq!(renyi_projection_oracle(3.0, -0.25).unwrap().tau(), 4.0);
    assert!((renyi_projection_oracle(2.2, -1.0 / 2.5).unwrap().tau() - 2.5).abs() < 1e-12);
    assert!(renyi_projection_oracle(3.0, -1.0 / 2.5).is_err());
    assert!(renyi_projection_oracle(3.0, -0.5).is_err());
    assert_eq!(renyi_projection(4.0, -1.0 / 3.0).unwrap().tau(), 4.0);
    assert!((renyi_projection(3.0, -0.3).unwrap().tau() - 1.0 / 0.3).abs() < 1e-12);
}

#[test]
fn oracle_passes_population_check() {
    let g = grid(-20.0, 20.0, 2001);
    for (tau, s) in [(3.0, -0.25), (5.0, -0.1), (4.0, -0.2)] {
        let target = QTauFamily::new(tau).unwrap();
        let cand = renyi_projection_oracle(tau, s).unwrap();
        let rep = population_projection_check(&target, &cand, s, &g, 1e-8, &QuadScheme::default()).unwrap();
        assert!(rep.pass, "tau {tau} s {s}: {}", rep.max_residual);
    }
}

#[test]
fn qtau_concavity_index() {
    let f = |x: f64| qtau_pdf(3.0, x).unwrap();
    assert!(check_s_concavity(f, -1.0 / 3.0, &grid(-5.0, 5.0, 41)).is_empty());
    assert!(!check_s_concavity(f, -0.2, &grid(-0.5, 0.5, 41)).is_empty());
}

#[test]
fn laplace_limit() {
    let q = QTauFamily::new(1e3).unwrap();
    for x in grid(-5.0, 5.0, 101) {
        assert!((q.pdf(x) - 0.5 * (-x.abs()).exp()).abs() < 1e-2);
    }
}

#[test]
fn student_t_is_in_its_class() {
    let t = StudentT::new(3.0).unwrap();
    assert_eq!(t.concavity_index(), -0.25);
    assert!(check_s_concavity(|x| t.pdf(x), -0.25, &grid(-6.0, 6.0, 41)).is_empty());
    let mass = gauss(|x| t.pdf(x), -50.0, 50.0, 400);
    assert!((mass - (t.cdf(50.0) - t.cdf(-50.0))).abs() < 1e-10);
}

#[test]
fn member_of_the_class_is_its_own_projection() {
    // q₃ is (−0.4)-concave, so q₂.₅ cannot be its projection at s = −0.4
    let g = grid(-20.0, 20.0, 2001);
    let q3 = QTauFamily::new(3.0).unwrap();
    let q25 = QTauFamily::new(2.5).unwrap();
    let own = population_projection_check(&q3, &renyi_projection(3.0, -0.4).unwrap(), -0.4, &g, 1e-8, &QuadScheme::default()).unwrap();
    assert!(own.pass);
    let other = population_projection_check(&q3, &q25, -0.4, &g, 1e-8, &QuadScheme::default()).unwrap();
    assert!(!other.pass);
}

mod common;

use renyi_scd::io::{read_sample_csv, sample_digest};
use renyi_scd::{fit_logconcave, fit_renyi, FitArtifact, RenyiIndex, SolverOptions, SortedSample};

#[test]
fn artifact_round_trip() {
    let sample = common::qtau_sample(3.0, 150, 21);
    let (fit, rep) = fit_renyi(&sample, RenyiIndex::new(-0.3).unwrap(), &SolverOptions::default()).unwrap();
    let art = FitArtifact::from_fit(&fit, &rep, &sample);
    let dir = std::env::temp_dir().join(format!("renyi-scd-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("fit.json");
    art.save(&path).unwrap();
    let back = FitArtifact::load(&path).unwrap();
    assert_eq!(back, art);
    let rebuilt = back.to_fit(&sample).unwrap();
    assert!((rebuilt.objective() - fit.objective()).abs() <= 1e-10 * fit.objective().abs());
    assert_eq!(back.sample_digest, sample_digest(&sample));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn logconcave_artifact_has_zero_index() {
    let sample = common::normal_sample(40, 1);
    let (fit, rep) = fit_logconcave(&sample, &SolverOptions::default()).unwrap();
    let art = FitArtifact::from_fit(&fit, &rep, &sample);
    assert_eq!(art.s, 0.0);
    let rebuilt = FitArtifact::from_json(&art.to_json().unwrap()).unwrap().to_fit(&sample).unwrap();
    assert_eq!(rebuilt.objective(), fit.objective());
}

#[test]
fn malformed_artifacts_are_rejected() {
    let sample = SortedSample::new(&[0.0, 1.0, 2.0]).unwrap();
    let (fit, rep) = fit_renyi(&sample, RenyiIndex::new(-0.5).unwrap(), &SolverOptions::default()).unwrap();
    let art = FitArtifact::from_fit(&fit, &rep, &sample);
    let mut short = art.clone();
    short.g_values.pop();
    assert!(FitArtifact::from_json(&short.to_json().unwrap()).is_err());
    let mut unsorted = art.clone();
    unsorted.knots.swap(0, 1);
    assert!(FitArtifact::from_json(&unsorted.to_json().unwrap()).is_err());
    let other = SortedSample::new(&[0.0, 1.0, 3.0]).unwrap();
    assert!(art.to_fit(&other).is_err());
}

#[test]
fn csv_input_to_fit() {
    let text = "x\n0.3\n-1.2\n0.3\n2.5\n";
    let sample = SortedSample::new(&read_sample_csv(text.as_bytes()).unwrap()).unwrap();
    assert_eq!(sample.len(), 3);
    assert_eq!(sample.n_raw(), 4);
}

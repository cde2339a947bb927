use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use renyi_scd::certify::characterization_residuals;
use renyi_scd::{fit_logconcave, fit_renyi, warm_start_path, RenyiIndex, SolverOptions};
use renyi_scd_bench::q3_sample;

fn renyi_fits(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let index = RenyiIndex::new(-1.0 / 3.0).unwrap();
    let mut group = c.benchmark_group("fit_renyi");
    group.sample_size(10);
    for n in [200, 1000, 5000] {
        let sample = q3_sample(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| b.iter(|| fit_renyi(s, index, &opts).unwrap()));
    }
    group.finish();
}

fn logconcave_fits(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("fit_logconcave");
    group.sample_size(10);
    for n in [200, 1000] {
        let sample = q3_sample(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| b.iter(|| fit_logconcave(s, &opts).unwrap()));
    }
    group.finish();
}

fn warm_path(c: &mut Criterion) {
    let opts = SolverOptions::default();
    let sample = q3_sample(500, 3);
    let s_list = [-0.5, -0.3, -0.2, -0.1, -0.05, -0.02];
    c.bench_function("warm_start_path/500", |b| b.iter(|| warm_start_path(&sample, &s_list, &opts).unwrap()));
}

fn certificate(c: &mut Criterion) {
    let sample = q3_sample(5000, 4);
    let (fit, _) = fit_renyi(&sample, RenyiIndex::new(-0.4).unwrap(), &SolverOptions::default()).unwrap();
    let tol = 1e-7 * sample.range();
    c.bench_function("characterization_residuals/5000", |b| b.iter(|| characterization_residuals(&fit, &sample, tol).unwrap()));
}

criterion_group!(benches, renyi_fits, logconcave_fits, warm_path, certificate);
criterion_main!(benches);

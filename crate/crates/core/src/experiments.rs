//! Seeded Monte-Carlo studies: pointwise and mode rates, continuity in `s`, and
//! off-model projection consistency.
//!
//! Every replicate draws from its own ChaCha stream keyed by `(seed, n index,
//! replicate)` and results are gathered by index, so outputs do not depend on the
//! number of worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Law, QTauFamily, StandardNormal, StudentT};
use crate::certify::characterization_residuals;
use crate::error::{Error, Result};
use crate::fit::DensityFit;
use crate::model::{RenyiIndex, SortedSample};
use crate::quad::{integrate_lower_tail, integrate_pieces, integrate_upper_tail, QuadScheme};
use crate::solver::{fit_logconcave, fit_renyi, SolverOptions};
use crate::stats::{iqr, median, ols, LinearFit};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "RENYI_SCD_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Qtau { tau: f64 },
    StudentT { nu: f64 },
    Normal,
}

impl Family {
    pub fn law(&self) -> Result<Box<dyn Law + Send>> {
        Ok(match *self {
            Family::Qtau { tau } => Box::new(QTauFamily::new(tau)?),
            Family::StudentT { nu } => Box::new(StudentT::new(nu)?),
            Family::Normal => Box::new(StandardNormal::default()),
        })
    }

    /// All supported families are symmetric and unimodal about zero.
    pub fn mode(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Pointwise,
    Mode,
    Projection,
    Continuity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: Family,
    #[serde(default)]
    pub study: Option<StudyKind>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub s_list: Option<Vec<f64>>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub x0: Vec<f64>,
    /// Root of every random stream; 0 when absent.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub parallelism: Option<usize>,
    /// Order of the first non-vanishing derivative of `g₀` at the points of interest.
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_k() -> u32 {
    2
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be non-empty and strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config("every n must be at least 2".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        if let Some(s) = self.s {
            RenyiIndex::new(s)?;
        }
        if let Some(list) = &self.s_list {
            for &s in list {
                RenyiIndex::new(s)?;
            }
        }
        self.solver.validate()?;
        self.family.law()?;
        Ok(())
    }

    fn index(&self) -> Result<RenyiIndex> {
        RenyiIndex::new(self.s.ok_or_else(|| Error::Config("missing key `s`".into()))?)
    }
}

/// Requested parallelism capped by [`THREADS_ENV`]; defaults to the machine size.
pub fn effective_threads(requested: Option<usize>) -> usize {
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&c| c >= 1);
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Deterministic stream for one `(n index, replicate)` cell.
pub fn replicate_rng(seed: u64, n_index: usize, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_index as u64) << 32) | replicate as u64);
    rng
}

fn run_pool<T: Send>(threads: usize, count: usize, task: impl Fn(usize) -> T + Sync) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&task).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Ok,
    SolverFailure,
    CertifyFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub status: ReplicateStatus,
    /// One value per metric, NaN unless the status is `Ok`.
    pub values: Vec<f64>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerN {
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub used: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    /// Expected slope of `ln median` against `ln n`, when the theory gives one.
    pub target_slope: Option<f64>,
    pub per_n: Vec<PerN>,
    pub fit: Option<LinearFit>,
    /// `slope ± 2·se`.
    pub band: Option<(f64, f64)>,
}

impl MetricSummary {
    pub fn slope(&self) -> f64 {
        self.fit.map_or(f64::NAN, |f| f.slope)
    }

    pub fn medians(&self) -> Vec<f64> {
        self.per_n.iter().map(|p| p.median).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateResult {
    pub study: String,
    pub seed: u64,
    pub metric_names: Vec<String>,
    pub metrics: Vec<MetricSummary>,
    pub failure_rate: f64,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

impl RateResult {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Tidy CSV, one row per `(n, replicate)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string(), "replicate".to_string(), "status".to_string()];
        header.extend(self.metric_names.iter().cloned());
        header.push("message".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.n.to_string(), r.replicate.to_string(), status_label(r.status).to_string()];
            row.extend(r.values.iter().map(|v| v.to_string()));
            row.push(r.message.clone());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn status_label(s: ReplicateStatus) -> &'static str {
    match s {
        ReplicateStatus::Ok => "ok",
        ReplicateStatus::SolverFailure => "solver_failure",
        ReplicateStatus::CertifyFailure => "certify_failure",
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Fits and certifies one sample; the error string is recorded on failure.
fn certified_fit(sample: &SortedSample, index: Option<RenyiIndex>, opts: &SolverOptions) -> std::result::Result<DensityFit, (ReplicateStatus, String)> {
    let fitted = match index {
        Some(idx) => fit_renyi(sample, idx, opts),
        None => fit_logconcave(sample, opts),
    };
    let fit = fitted.map_err(|e| (ReplicateStatus::SolverFailure, e.to_string()))?.0;
    let tol = opts.char_tol_abs(sample);
    match characterization_residuals(&fit, sample, tol) {
        Ok(rep) if rep.pass => Ok(fit),
        Ok(rep) => Err((ReplicateStatus::CertifyFailure, format!("max residual {:e}", rep.max_positive_violation))),
        Err(e) => Err((ReplicateStatus::CertifyFailure, e.to_string())),
    }
}

fn draw(law: &dyn Law, seed: u64, n_index: usize, replicate: usize, n: usize) -> Result<SortedSample> {
    let mut rng = replicate_rng(seed, n_index, replicate);
    SortedSample::new(&law.sample(&mut rng, n))
}

/// Runs `replicates × n_grid` cells; `metrics` maps a certified fit to one value per metric.
fn replicate_grid(
    spec: &ExperimentSpec,
    law: &(dyn Law + Send),
    index: Option<RenyiIndex>,
    metric_count: usize,
    metrics: impl Fn(&DensityFit, &SortedSample) -> std::result::Result<Vec<f64>, String> + Sync,
) -> Result<Vec<ReplicateRecord>> {
    let reps = spec.replicates;
    let cells = spec.n_grid.len() * reps;
    let threads = effective_threads(spec.parallelism);
    let out = run_pool(threads, cells, |cell| {
        let (ni, rep) = (cell / reps, cell % reps);
        let n = spec.n_grid[ni];
        let failed = |status, message| ReplicateRecord { n, replicate: rep, status, values: vec![f64::NAN; metric_count], message };
        let sample = match draw(law, spec.seed, ni, rep, n) {
            Ok(s) => s,
            Err(e) => return failed(ReplicateStatus::SolverFailure, e.to_string()),
        };
        match certified_fit(&sample, index, &spec.solver) {
            Ok(fit) => match metrics(&fit, &sample) {
                Ok(values) => ReplicateRecord { n, replicate: rep, status: ReplicateStatus::Ok, values, message: String::new() },
                Err(msg) => failed(ReplicateStatus::SolverFailure, msg),
            },
            Err((status, msg)) => failed(status, msg),
        }
    })?;
    Ok(out)
}

fn summarize(
    study: &str,
    spec: &ExperimentSpec,
    names: Vec<String>,
    targets: Vec<Option<f64>>,
    absolute: Vec<bool>,
    records: Vec<ReplicateRecord>,
) -> Result<RateResult> {
    let mut metrics = Vec::with_capacity(names.len());
    for (m, name) in names.iter().enumerate() {
        let per_n: Vec<PerN> = spec
            .n_grid
            .iter()
            .map(|&n| {
                let rows: Vec<&ReplicateRecord> = records.iter().filter(|r| r.n == n).collect();
                let vals: Vec<f64> =
                    rows.iter().filter(|r| r.status == ReplicateStatus::Ok).map(|r| r.values[m]).collect();
                PerN { n, median: median(&vals), iqr: iqr(&vals), used: vals.len(), failed: rows.len() - vals.len() }
            })
            .collect();
        let (fit, band) = if absolute[m] && per_n.len() >= 2 && per_n.iter().all(|p| p.median > 0.0) {
            let x: Vec<f64> = per_n.iter().map(|p| (p.n as f64).ln()).collect();
            let y: Vec<f64> = per_n.iter().map(|p| p.median.ln()).collect();
            let f = ols(&x, &y)?;
            let band = f.slope_se.is_finite().then_some((f.slope - 2.0 * f.slope_se, f.slope + 2.0 * f.slope_se));
            (Some(f), band)
        } else {
            (None, None)
        };
        metrics.push(MetricSummary { name: name.clone(), target_slope: targets[m], per_n, fit, band });
    }
    let failures = records.iter().filter(|r| r.status != ReplicateStatus::Ok).count();
    Ok(RateResult {
        study: study.to_string(),
        seed: spec.seed,
        metric_names: names,
        metrics,
        failure_rate: failures as f64 / records.len().max(1) as f64,
        records,
    })
}

/// `d/dx f₀(x)^s` by central differences.
fn truth_g_slope(law: &dyn Law, s: f64, x: f64) -> f64 {
    let h = 1e-5 * (1.0 + x.abs());
    (law.pdf(x + h).powf(s) - law.pdf(x - h).powf(s)) / (2.0 * h)
}

/// `|f̂_n(x₀) − f₀(x₀)|` and `|ĝ_n'(x₀+) − g₀'(x₀)|` at each `x₀`.
pub fn pointwise_rate_study(spec: &ExperimentSpec) -> Result<RateResult> {
    spec.validate()?;
    let index = spec.index()?;
    if spec.x0.is_empty() {
        return Err(Error::Config("missing key `x0`".into()));
    }
    let law = spec.family.law()?;
    let k = spec.k as f64;
    let mut names = Vec::new();
    let mut targets = Vec::new();
    for x in &spec.x0 {
        names.push(format!("density@{x}"));
        targets.push(Some(-k / (2.0 * k + 1.0)));
        names.push(format!("derivative@{x}"));
        targets.push(Some(-(k - 1.0) / (2.0 * k + 1.0)));
    }
    let truth: Vec<(f64, f64)> = spec.x0.iter().map(|&x| (law.pdf(x), truth_g_slope(law.as_ref(), index.s(), x))).collect();
    let records = replicate_grid(spec, law.as_ref(), Some(index), names.len(), |fit, sample| {
        let mut v = Vec::with_capacity(2 * truth.len());
        for (&x, &(f0, d0)) in spec.x0.iter().zip(&truth) {
            if x < sample.min() || x >= sample.max() {
                return Err(format!("x0 = {x} outside the sample hull"));
            }
            v.push((fit.density(x) - f0).abs());
            v.push((fit.g_right_slope(x) - d0).abs());
        }
        Ok(v)
    })?;
    let absolute = vec![true; names.len()];
    summarize("pointwise", spec, names, targets, absolute, records)
}

/// `|m̂_n − m₀|` and the signed error, `m̂_n = M(f̂_n)`.
pub fn mode_rate_study(spec: &ExperimentSpec) -> Result<RateResult> {
    spec.validate()?;
    let index = spec.index()?;
    let law = spec.family.law()?;
    let m0 = spec.family.mode();
    let k = spec.k as f64;
    let records = replicate_grid(spec, law.as_ref(), Some(index), 2, |fit, _| {
        let e = fit.mode() - m0;
        Ok(vec![e.abs(), e])
    })?;
    summarize(
        "mode",
        spec,
        vec!["mode_abs".into(), "mode_signed".into()],
        vec![Some(-1.0 / (2.0 * k + 1.0)), None],
        vec![true, false],
        records,
    )
}

/// `(1+|x|)^κ`-weighted L₁ weight exponent: `min(1, r − 1 − 0.1)`.
pub fn capped_kappa(r: f64) -> f64 {
    1.0f64.min(r - 1.1)
}

fn weighted_gap(kappa: f64, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 {
    move |x: f64| (1.0 + x.abs()).powf(kappa) * (f(x) - g(x)).abs()
}

fn hull_breaks(sample: &SortedSample) -> Vec<f64> {
    let mut b = sample.points().to_vec();
    if let Err(pos) = b.binary_search_by(|v| v.total_cmp(&0.0)) {
        if pos > 0 && pos < b.len() {
            b.insert(pos, 0.0);
        }
    }
    b
}

/// `∫ (1+|x|)^κ |f̂ − f₀|` over ℝ; outside the hull `f̂ = 0`.
pub fn weighted_l1_to_law(fit: &DensityFit, sample: &SortedSample, law: &dyn Law, kappa: f64, scheme: &QuadScheme) -> Result<f64> {
    let inside = integrate_pieces(weighted_gap(kappa, |x| fit.density(x), |x| law.pdf(x)), &hull_breaks(sample), scheme)?;
    let tail = |x: f64| (1.0 + x.abs()).powf(kappa) * law.pdf(x);
    Ok(inside + integrate_lower_tail(tail, sample.min(), scheme)? + integrate_upper_tail(tail, sample.max(), scheme)?)
}

/// `∫ (1+|x|)^κ |f̂₁ − f̂₂|` for two fits on the same sample.
pub fn weighted_l1_between(a: &DensityFit, b: &DensityFit, sample: &SortedSample, kappa: f64, scheme: &QuadScheme) -> Result<f64> {
    integrate_pieces(weighted_gap(kappa, |x| a.density(x), |x| b.density(x)), &hull_breaks(sample), scheme)
}

/// `max |f̂₁ − f̂₂|` over the middle 90% of the hull, on knots plus a uniform grid.
pub fn sup_distance_mid90(a: &DensityFit, b: &DensityFit, sample: &SortedSample) -> f64 {
    let (lo, hi) = (sample.min(), sample.max());
    let (l, h) = (lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo));
    let grid = (0..=2000).map(|i| l + (h - l) * i as f64 / 2000.0);
    let knots = sample.points().iter().copied().filter(|&x| x >= l && x <= h);
    grid.chain(knots).map(|x| (a.density(x) - b.density(x)).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuitySweep {
    pub s_list: Vec<f64>,
    pub kappa: Vec<f64>,
    pub weighted_l1: Vec<f64>,
    pub sup_mid90: Vec<f64>,
}

impl ContinuitySweep {
    /// Whether the distance strictly decreases over the last `m` entries.
    pub fn strictly_decreasing_tail(&self, m: usize) -> bool {
        let d = &self.weighted_l1;
        m <= d.len() && d[d.len() - m..].windows(2).all(|w| w[1] < w[0])
    }
}

/// Distances from `f̂_s` to the log-concave MLE along `s_list` (increasing toward 0).
pub fn s_continuity_sweep(sample: &SortedSample, s_list: &[f64], opts: &SolverOptions) -> Result<ContinuitySweep> {
    if s_list.is_empty() || s_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("s_list must be non-empty and strictly increasing".into()));
    }
    let (lc, _) = fit_logconcave(sample, opts)?;
    let scheme = QuadScheme::default();
    let mut out = ContinuitySweep { s_list: s_list.to_vec(), kappa: vec![], weighted_l1: vec![], sup_mid90: vec![] };
    for &s in s_list {
        let idx = RenyiIndex::new(s)?;
        let (fit, _) = fit_renyi(sample, idx, opts)?;
        let kappa = capped_kappa(idx.r());
        out.kappa.push(kappa);
        out.weighted_l1.push(weighted_l1_between(&fit, &lc, sample, kappa, &scheme)?);
        out.sup_mid90.push(sup_distance_mid90(&fit, &lc, sample));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityStudy {
    pub seed: u64,
    pub n: usize,
    pub sweeps: Vec<ContinuitySweep>,
}

impl ContinuityStudy {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "s", "kappa", "weighted_l1", "sup_mid90"]).map_err(csv_err)?;
        for (rep, sw) in self.sweeps.iter().enumerate() {
            for i in 0..sw.s_list.len() {
                w.write_record([
                    rep.to_string(),
                    sw.s_list[i].to_string(),
                    sw.kappa[i].to_string(),
                    sw.weighted_l1[i].to_string(),
                    sw.sup_mid90[i].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One continuity sweep per replicate at `n = n_grid[0]`.
pub fn continuity_study(spec: &ExperimentSpec) -> Result<ContinuityStudy> {
    spec.validate()?;
    let s_list = spec.s_list.clone().ok_or_else(|| Error::Config("missing key `s_list`".into()))?;
    let law = spec.family.law()?;
    let n = spec.n_grid[0];
    let sweeps = run_pool(effective_threads(spec.parallelism), spec.replicates, |rep| {
        let sample = draw(law.as_ref(), spec.seed, 0, rep, n)?;
        s_continuity_sweep(&sample, &s_list, &spec.solver)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ContinuityStudy { seed: spec.seed, n, sweeps })
}

/// Weighted L₁ distance from `f̂_n` (fit at `s`) to the population projection
/// of the `q_τ` truth in `spec.family`.
pub fn off_model_projection_study(spec: &ExperimentSpec) -> Result<RateResult> {
    spec.validate()?;
    let index = spec.index()?;
    let Family::Qtau { tau } = spec.family else {
        return Err(Error::Config("projection study needs family kind = \"qtau\"".into()));
    };
    let law = spec.family.law()?;
    let target = crate::analytic::renyi_projection(tau, index.s())?;
    let kappa = capped_kappa(index.r());
    let scheme = QuadScheme::default();
    let records = replicate_grid(spec, law.as_ref(), Some(index), 1, |fit, sample| {
        weighted_l1_to_law(fit, sample, &target, kappa, &scheme).map(|d| vec![d]).map_err(|e| e.to_string())
    })?;
    summarize("projection", spec, vec!["weighted_l1".into()], vec![None], vec![true], records)
}

//! `renyi-scd` command-line tool.
//!
//! Exit codes: 0 success (and certified), 1 usage or input error, 2 solver
//! non-convergence, 3 certification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use renyi_scd::analytic::renyi_projection_oracle;
use renyi_scd::certify::{characterization_residuals, population_projection_check, CharReport, ProjectionReport};
use renyi_scd::experiments::{
    continuity_study, mode_rate_study, off_model_projection_study, pointwise_rate_study, StudyKind, THREADS_ENV,
};
use renyi_scd::io::{read_sample_file, sample_digest, FitArtifact};
use renyi_scd::solver::{fit_shape, SolverOptions};
use renyi_scd::{Error, ExperimentSpec, QTauFamily, QuadScheme, RateResult, RenyiIndex, Shape, SortedSample};

#[derive(Parser)]
#[command(name = "renyi-scd", version, about = "Rényi-divergence estimation of s-concave densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a density to a one-column CSV sample and write a JSON artifact.
    Fit(FitArgs),
    /// Check a fit artifact against its sample and print the certificate.
    Certify(CertifyArgs),
    /// Report the population projection of q_tau and check it.
    Project(ProjectArgs),
    /// Distances to the log-concave fit along a list of s values.
    SweepS(StudyArgs),
    /// Monte-Carlo rate or projection study from a TOML config.
    Rates(StudyArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Concavity index in (-1, 0).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "logconcave", required_unless_present = "logconcave")]
    s: Option<f64>,
    #[arg(long)]
    logconcave: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    max_newton_iters: Option<usize>,
    #[arg(long)]
    barrier_mu0: Option<f64>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Characterization tolerance relative to the sample range.
    #[arg(long)]
    char_tol: Option<f64>,
    #[arg(long)]
    mass_tol: Option<f64>,
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(v) = self.max_newton_iters {
            o.max_newton_iters = v;
        }
        if let Some(v) = self.barrier_mu0 {
            o.barrier_mu0 = v;
        }
        if let Some(v) = self.grad_tol {
            o.grad_tol = v;
        }
        if let Some(v) = self.char_tol {
            o.char_tol = v;
        }
        if let Some(v) = self.mass_tol {
            o.mass_tol = v;
        }
        o
    }
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    sample: PathBuf,
    /// Proceed even if the sample digest differs from the artifact's.
    #[arg(long)]
    force: bool,
    /// Tolerance relative to the sample range.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long, default_value = "qtau")]
    family: String,
    #[arg(long)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    /// `lo:hi:count`.
    #[arg(long, default_value = "-20:20:4001", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the config seed; without either the seed is 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, further capped by RENYI_SCD_THREADS.
    #[arg(long)]
    parallel: Option<usize>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Input(anyhow::Error),
    NonConvergence(anyhow::Error),
    Certification(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Project(a) => cmd_project(a),
        Command::SweepS(a) => cmd_sweep_s(a),
        Command::Rates(a) => cmd_rates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::NonConvergence(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Certification(e)) => {
            eprintln!("certification failed: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_sample(path: &Path) -> anyhow::Result<SortedSample> {
    let data = read_sample_file(path).with_context(|| format!("reading {}", path.display()))?;
    SortedSample::new(&data).with_context(|| format!("sample in {}", path.display()))
}

fn emit(json: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{json}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{json}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    let shape = match a.s {
        Some(s) => Shape::Renyi(RenyiIndex::new(s)?),
        None => Shape::LogConcave,
    };
    let opts = a.solver.options();
    opts.validate()?;
    let sample = load_sample(&a.input)?;
    let (fit, report, converged) = match fit_shape(&sample, shape, &opts) {
        Ok((fit, report)) => (fit, report, true),
        Err(Error::NonConvergence { fit, report }) => (*fit, *report, false),
        Err(e) => return Err(e.into()),
    };
    for w in &report.warnings {
        warn!("{w}");
    }
    let artifact = FitArtifact::from_fit(&fit, &report, &sample);
    artifact.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    info!("wrote {}", a.out.display());
    if !converged {
        return Err(Failure::NonConvergence(anyhow!(
            "solver did not converge (max residual {:e}); artifact written to {}",
            fit.max_char_residual(),
            a.out.display()
        )));
    }
    let tol = opts.char_tol_abs(&sample);
    let cert = characterization_residuals(&fit, &sample, tol)?;
    if !cert.pass {
        return Err(Failure::Certification(anyhow!(
            "characterization residual {:e} exceeds {:e}",
            cert.max_positive_violation,
            tol
        )));
    }
    eprintln!(
        "fit: n = {}, knots = {}, objective = {:.12}, total mass = {:.12}, max residual = {:e}",
        sample.len(),
        fit.knot_set().len(),
        fit.objective(),
        fit.total_mass(),
        fit.max_char_residual()
    );
    Ok(())
}

#[derive(Serialize)]
struct CertifyOutput {
    pass: bool,
    convex: bool,
    /// `(knot index, second divided difference)` of the first violation.
    convexity_violation: Option<(usize, f64)>,
    total_mass: Option<f64>,
    characterization: Option<CharReport>,
}

fn cmd_certify(a: CertifyArgs) -> CmdResult {
    let artifact = FitArtifact::load(&a.fit).with_context(|| format!("loading {}", a.fit.display()))?;
    let sample = load_sample(&a.sample)?;
    let digest = sample_digest(&sample);
    if digest != artifact.sample_digest {
        if !a.force {
            return Err(Failure::Input(anyhow!(
                "sample digest {digest} does not match the artifact's {}; use --force to proceed",
                artifact.sample_digest
            )));
        }
        warn!("sample digest mismatch ignored (--force)");
    }
    if artifact.knots != sample.points() {
        return Err(Failure::Input(anyhow!("artifact knots do not match the sample support points")));
    }
    let tol = a.tol * sample.range();
    let out = match artifact.to_fit(&sample) {
        Ok(fit) => {
            let report = characterization_residuals(&fit, &sample, tol)?;
            CertifyOutput {
                pass: report.pass,
                convex: true,
                convexity_violation: None,
                total_mass: Some(fit.total_mass()),
                characterization: Some(report),
            }
        }
        Err(Error::NotConvex { index, value }) => CertifyOutput {
            pass: false,
            convex: false,
            convexity_violation: Some((index, value)),
            total_mass: None,
            characterization: None,
        },
        Err(e) => return Err(e.into()),
    };
    let json = serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)?;
    emit(&json, a.out.as_deref())?;
    if !out.pass {
        let why = if out.convex { "characterization residuals exceed tolerance" } else { "g is not convex" };
        return Err(Failure::Certification(anyhow!("{why}")));
    }
    Ok(())
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        bail!("grid must be lo:hi:count, got {spec:?}");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid lower bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid upper bound {hi:?}"))?;
    let count: usize = count.trim().parse().with_context(|| format!("grid count {count:?}"))?;
    if !(lo < hi) || count < 3 {
        bail!("grid needs lo < hi and at least 3 points");
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

#[derive(Serialize)]
struct ProjectOutput {
    family: String,
    tau: f64,
    s: f64,
    /// The projection is `q_{projection_tau}`.
    projection_tau: f64,
    pass: bool,
    check: ProjectionReport,
}

fn cmd_project(a: ProjectArgs) -> CmdResult {
    if a.family != "qtau" {
        return Err(Failure::Input(anyhow!("unknown family {:?}; only \"qtau\" is supported", a.family)));
    }
    let truth = QTauFamily::new(a.tau)?;
    let projection = renyi_projection_oracle(a.tau, a.s)?;
    let grid = parse_grid(&a.grid)?;
    let check = population_projection_check(&truth, &projection, a.s, &grid, a.tol, &QuadScheme::default())?;
    let out =
        ProjectOutput { family: a.family, tau: a.tau, s: a.s, projection_tau: projection.tau(), pass: check.pass, check };
    let json = serde_json::to_string_pretty(&out).map_err(anyhow::Error::from)?;
    emit(&json, a.out.as_deref())?;
    if !out.pass {
        return Err(Failure::Certification(anyhow!("projection check failed")));
    }
    Ok(())
}

fn load_spec(a: &StudyArgs) -> anyhow::Result<ExperimentSpec> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut spec = ExperimentSpec::from_toml_str(&text).with_context(|| format!("config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if a.parallel.is_some() {
        spec.parallelism = a.parallel;
    }
    if let Ok(cap) = std::env::var(THREADS_ENV) {
        info!("{THREADS_ENV}={cap} caps the worker pool");
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    Ok(spec)
}

fn write_rate(result: &RateResult, dir: &Path) -> anyhow::Result<()> {
    let csv_path = dir.join(format!("{}.csv", result.study));
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    result.write_csv(std::io::BufWriter::new(file))?;
    let json_path = dir.join(format!("{}.json", result.study));
    std::fs::write(&json_path, result.summary_json()? + "\n")?;
    for m in &result.metrics {
        match m.target_slope {
            Some(t) => eprintln!("{}: {}: slope {:.4} (target {:.4})", result.study, m.name, m.slope(), t),
            None => eprintln!("{}: {}: slope {:.4}", result.study, m.name, m.slope()),
        }
    }
    Ok(())
}

fn cmd_sweep_s(a: StudyArgs) -> CmdResult {
    let spec = load_spec(&a)?;
    let study = continuity_study(&spec)?;
    let csv_path = a.out_dir.join("continuity.csv");
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    study.write_csv(std::io::BufWriter::new(file))?;
    let json = serde_json::to_string_pretty(&study).map_err(anyhow::Error::from)?;
    std::fs::write(a.out_dir.join("continuity.json"), json + "\n").map_err(anyhow::Error::from)?;
    for (rep, sw) in study.sweeps.iter().enumerate() {
        eprintln!("replicate {rep}: final weighted L1 {:.4e}", sw.weighted_l1.last().copied().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn cmd_rates(a: StudyArgs) -> CmdResult {
    let spec = load_spec(&a)?;
    let kinds: Vec<StudyKind> = match spec.study {
        Some(StudyKind::Continuity) => return cmd_sweep_s(a),
        Some(k) => vec![k],
        None => vec![StudyKind::Pointwise, StudyKind::Mode],
    };
    for kind in kinds {
        let result = match kind {
            StudyKind::Pointwise => pointwise_rate_study(&spec)?,
            StudyKind::Mode => mode_rate_study(&spec)?,
            StudyKind::Projection => off_model_projection_study(&spec)?,
            StudyKind::Continuity => unreachable!(),
        };
        write_rate(&result, &a.out_dir)?;
    }
    Ok(())
}

//! Sample CSV input, fit artifacts and sample digests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::DensityFit;
use crate::model::{PiecewiseLinear, PlConvexFn, RenyiIndex, Shape, SortedSample};
use crate::solver::SolveReport;

pub const ARTIFACT_VERSION: &str = "1.0.0";

/// Reads one number per line. `#` starts a comment, blank lines are skipped and a
/// non-numeric first line is taken as a header.
pub fn read_sample_csv<R: std::io::Read>(input: R) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(idx + 1, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        match fields.as_slice() {
            [] => continue,
            [field] => match field.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                Ok(_) => return Err(Error::NonFinite(format!("line {line}: {field}"))),
                Err(_) if out.is_empty() && idx == 0 => continue,
                Err(_) => return Err(Error::Parse { line, msg: format!("not a number: {field:?}") }),
            },
            _ => return Err(Error::Parse { line, msg: format!("expected one column, found {}", fields.len()) }),
        }
    }
    Ok(out)
}

pub fn read_sample_file(path: &Path) -> Result<Vec<f64>> {
    read_sample_csv(std::fs::File::open(path)?)
}

/// SHA-256 over the collapsed sample: raw size, then each support point and its
/// weight as little-endian IEEE bits.
pub fn sample_digest(sample: &SortedSample) -> String {
    let mut h = Sha256::new();
    h.update((sample.n_raw() as u64).to_le_bytes());
    for (x, w) in sample.points().iter().zip(sample.weights()) {
        h.update(x.to_bits().to_le_bytes());
        h.update(w.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_char_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// On-disk form of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub version: String,
    /// `s`, with 0 for the log-concave fit.
    pub s: f64,
    pub knots: Vec<f64>,
    pub g_values: Vec<f64>,
    pub knot_set: Vec<f64>,
    pub objective: f64,
    pub total_mass: f64,
    pub diagnostics: Diagnostics,
    pub sample_digest: String,
}

impl FitArtifact {
    pub fn from_fit(fit: &DensityFit, report: &SolveReport, sample: &SortedSample) -> Self {
        Self {
            version: ARTIFACT_VERSION.to_string(),
            s: fit.shape().s(),
            knots: fit.g().knots().to_vec(),
            g_values: fit.g().values().to_vec(),
            knot_set: fit.knot_set().to_vec(),
            objective: fit.objective(),
            total_mass: fit.total_mass(),
            diagnostics: Diagnostics {
                max_char_residual: fit.max_char_residual(),
                iterations: report.iterations,
                converged: report.converged,
            },
            sample_digest: sample_digest(sample),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and checks structure; unknown major versions are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let art: Self = serde_json::from_str(text)?;
        let major = art.version.split('.').next().and_then(|m| m.parse::<u64>().ok());
        let ours = ARTIFACT_VERSION.split('.').next().and_then(|m| m.parse::<u64>().ok());
        if major.is_none() || major != ours {
            return Err(Error::Artifact(format!("unsupported artifact version {:?}", art.version)));
        }
        if art.knots.len() != art.g_values.len() {
            return Err(Error::Artifact(format!(
                "{} knots but {} g values",
                art.knots.len(),
                art.g_values.len()
            )));
        }
        if art.knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Artifact("knots must be strictly increasing".into()));
        }
        Ok(art)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn shape(&self) -> Result<Shape> {
        if self.s == 0.0 {
            Ok(Shape::LogConcave)
        } else {
            Ok(Shape::Renyi(RenyiIndex::new(self.s)?))
        }
    }

    pub fn piecewise(&self) -> Result<PiecewiseLinear> {
        PiecewiseLinear::new(self.knots.clone(), self.g_values.clone())
    }

    /// Rebuilds the fit; fails if `g` is not convex or the knots differ from `sample`.
    pub fn to_fit(&self, sample: &SortedSample) -> Result<DensityFit> {
        let g = PlConvexFn::try_from(self.piecewise()?)?;
        DensityFit::new(g, self.shape()?, sample)
    }
}

use thiserror::Error;

use crate::solver::SolveReport;
use crate::DensityFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("s = {s} is outside the valid range: expected -1 < s < 0")]
    InvalidIndex { s: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample has {distinct} distinct finite point(s); at least 2 are required")]
    DegenerateSample { distinct: usize },

    #[error("non-finite value in input: {0}")]
    NonFinite(String),

    #[error("knot/sample mismatch: {0}")]
    KnotMismatch(String),

    #[error("function is not convex: second divided difference {value:e} at knot {index}")]
    NotConvex { index: usize, value: f64 },

    #[error("function must be positive on its domain (min value {min:e})")]
    NotPositive { min: f64 },

    #[error("solver did not converge after {iterations} Newton iterations", iterations = .report.iterations)]
    NonConvergence {
        fit: Box<DensityFit>,
        report: Box<SolveReport>,
    },

    #[error("adaptive quadrature failed to converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("moment of order {order} is not integrable: need order < {limit}")]
    Integrability { order: u32, limit: f64 },

    #[error("regression is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Shape-constrained density estimation under `s`-concavity via Rényi divergence.
//!
//! The estimator minimizes `Σ wᵢ g(Xᵢ) + (1/|β|) ∫ g^β` over convex piecewise-linear
//! `g` with knots at the data and reports `f̂ = ĝ^{1/s}`. The log-concave maximum
//! likelihood estimator is the `s → 0` endpoint and is available through the same API.

pub mod analytic;
pub mod certify;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod perturb;
pub mod quad;
pub mod segment;
pub mod solver;
pub mod stats;

pub use analytic::{Law, QTauFamily};
pub use certify::{characterization_residuals, CharReport};
pub use error::{Error, Result};
pub use experiments::{ExperimentSpec, Family, RateResult};
pub use io::FitArtifact;
pub use perturb::PerturbedDensity;
pub use fit::DensityFit;
pub use model::{PiecewiseLinear, PlConvexFn, RenyiIndex, Shape, SortedSample};
pub use objective::SegmentIntegralScheme;
pub use quad::QuadScheme;
pub use solver::{fit_logconcave, fit_renyi, fit_renyi_from, warm_start_path, SolveReport, SolverOptions};

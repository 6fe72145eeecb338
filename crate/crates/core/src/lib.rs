//! Group-sparse kernel additive classification.
//!
//! The classifier is a sum of per-group kernel expansions
//! `f(x) = sum_j sum_i alpha_ij K_j(x_i^(j), x^(j))`, fitted by minimizing a
//! class-weighted coherence loss plus a group-lasso penalty with groupwise
//! majorization descent. Around it sit the pieces of a small tabular
//! pipeline: CSV ingestion and scaling, elastic-net feature screening,
//! stratified cross-validation, metrics, correlation tables and partial
//! dependence exports.

pub mod coherence;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod gmd_solver;
pub mod interpret;
pub mod kernels;
pub mod model;
pub mod rng;
pub mod selection;

pub use coherence::{ClassWeights, CoherenceParams};
pub use dataio::{Dataset, FeatureTable, GroupConfig, GroupPartition, Label, ScalingParams};
pub use error::{Error, Result};
pub use evaluation::{CvReport, GridPoint, GridResult, MetricSet, TTest};
pub use gmd_solver::{CoefBlocks, SolveReport, SolverConfig};
pub use interpret::{GroupImportance, PdCurve};
pub use kernels::{GammaMode, GramBlocks, KernelSpec};
pub use model::{ModelState, PreparedFit};
pub use selection::{EnConfig, SelectionResult};

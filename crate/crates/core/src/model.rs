//! The fitted additive classifier: training, scoring, persistence.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::coherence::{ClassWeights, CoherenceParams};
use crate::dataio::{
    standardize, write_file, Dataset, FeatureTable, GroupPartition, Label, ScalingParams,
};
use crate::error::{Error, Result};
use crate::gmd_solver::{self, CoefBlocks, SolveReport, SolverConfig};
use crate::kernels::{gram_matrix, GammaMode, GramBlocks, KernelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub(crate) alpha: CoefBlocks,
    pub(crate) train_features: Array2<f64>,
    pub(crate) feature_names: Vec<String>,
    pub(crate) train_sample_ids: Vec<String>,
    pub(crate) scaling: ScalingParams,
    pub(crate) partition: GroupPartition,
    pub(crate) kernel: KernelSpec,
    pub(crate) loss_params: CoherenceParams,
    pub(crate) lambda: f64,
    pub(crate) class_weights: ClassWeights,
    pub(crate) fit_intercept: bool,
    pub(crate) report: SolveReport,
}

impl ModelState {
    pub fn alpha(&self) -> &CoefBlocks {
        &self.alpha
    }

    /// Standardized training matrix the kernel expansion is centred on.
    pub fn train_features(&self) -> &Array2<f64> {
        &self.train_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn train_sample_ids(&self) -> &[String] {
        &self.train_sample_ids
    }

    pub fn scaling(&self) -> &ScalingParams {
        &self.scaling
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn loss_params(&self) -> &CoherenceParams {
        &self.loss_params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn class_weights(&self) -> &ClassWeights {
        &self.class_weights
    }

    pub fn report(&self) -> &SolveReport {
        &self.report
    }

    pub fn active_groups(&self) -> Vec<usize> {
        self.alpha.active_groups()
    }

    pub fn active_group_names(&self) -> Vec<String> {
        self.active_groups()
            .into_iter()
            .map(|j| self.partition.names()[j].clone())
            .collect()
    }

    pub fn n_train(&self) -> usize {
        self.train_features.nrows()
    }

    /// Scales a query table, matching columns by name.
    pub fn scale_query(&self, query: &FeatureTable) -> Result<Array2<f64>> {
        let aligned = query.align_to(&self.feature_names)?;
        self.scaling.apply(aligned.samples().view())
    }

    /// Per-group component values at standardized query rows, `d x m`.
    pub fn components_standardized(&self, query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if query.ncols() != self.train_features.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} columns, model has {}",
                query.ncols(),
                self.train_features.ncols()
            )));
        }
        let d = self.partition.n_groups();
        let mut out = Array2::zeros((d, query.nrows()));
        for j in 0..d {
            let sub = query.select(Axis(1), self.partition.group(j));
            let values = self.group_component_at(j, sub.view())?;
            out.row_mut(j).assign(&Array1::from(values));
        }
        Ok(out)
    }

    /// Component of group `j` at points given only by that group's
    /// standardized columns (`m x |group j|`).
    pub fn group_component_at(&self, j: usize, points: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let cols = self.partition.group(j);
        if points.ncols() != cols.len() {
            return Err(Error::DimensionMismatch(format!(
                "group {j} has {} features, points have {}",
                cols.len(),
                points.ncols()
            )));
        }
        let a = self.alpha.block(j);
        let gamma = self.kernel.gammas()[j];
        let train = self.train_features.select(Axis(1), cols);
        Ok(points
            .outer_iter()
            .map(|z| {
                train
                    .outer_iter()
                    .zip(a.iter())
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(x, &w)| {
                        let d2: f64 = x.iter().zip(z.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
                        w * (-gamma * d2).exp()
                    })
                    .sum()
            })
            .collect())
    }

    pub fn decision_standardized(&self, query: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let comps = self.components_standardized(query)?;
        Ok(comps
            .sum_axis(Axis(0))
            .iter()
            .map(|f| f + self.alpha.intercept())
            .collect())
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = self.train_features.dim();
        let d = self.partition.n_groups();
        self.partition
            .validate(p)
            .map_err(|e| Error::Schema(e.to_string()))?;
        self.scaling.validate()?;
        if self.alpha.n_groups() != d {
            return Err(Error::Schema(format!(
                "alpha has {} blocks but the partition has {d} groups",
                self.alpha.n_groups()
            )));
        }
        if self.alpha.n_samples() != n {
            return Err(Error::Schema(format!(
                "alpha blocks have length {} but there are {n} training rows",
                self.alpha.n_samples()
            )));
        }
        if self.scaling.len() != p || self.feature_names.len() != p {
            return Err(Error::Schema(format!(
                "scaling/feature names do not cover {p} training columns"
            )));
        }
        if self.kernel.n_groups() != d {
            return Err(Error::Schema(format!(
                "{} gammas for {d} groups",
                self.kernel.n_groups()
            )));
        }
        if self.train_sample_ids.len() != n {
            return Err(Error::Schema(
                "train_sample_ids length differs from rows".into(),
            ));
        }
        if self.train_features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite training feature".into()));
        }
        Ok(())
    }
}

/// A standardized training set with its Gram blocks, ready to be fitted at
/// many regularization levels.
#[derive(Debug, Clone)]
pub struct PreparedFit {
    standardized: Dataset,
    scaling: ScalingParams,
    partition: GroupPartition,
    kernel: KernelSpec,
    gram: GramBlocks,
}

impl PreparedFit {
    pub fn new(
        data: &Dataset,
        partition: &GroupPartition,
        kernel: Option<&KernelSpec>,
    ) -> Result<Self> {
        partition.validate(data.n_features())?;
        let n_pos = data.n_positive();
        if n_pos == 0 || n_pos == data.n_samples() {
            return Err(Error::SingleClass);
        }
        let (standardized, scaling) = standardize(data)?;
        let kernel = match kernel {
            Some(k) => k.clone(),
            None => GammaMode::Median.resolve(standardized.samples().view(), partition)?,
        };
        let gram = gram_matrix(standardized.samples().view(), partition, &kernel)?;
        Ok(Self {
            standardized,
            scaling,
            partition: partition.clone(),
            kernel,
            gram,
        })
    }

    pub fn with_gamma_mode(
        data: &Dataset,
        partition: &GroupPartition,
        mode: GammaMode,
    ) -> Result<Self> {
        match mode {
            GammaMode::Median => Self::new(data, partition, None),
            GammaMode::Shared(g) => Self::new(
                data,
                partition,
                Some(&KernelSpec::shared(g, partition.n_groups())?),
            ),
        }
    }

    pub fn gram(&self) -> &GramBlocks {
        &self.gram
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn standardized(&self) -> &Dataset {
        &self.standardized
    }

    pub fn labels(&self) -> &[Label] {
        self.standardized.labels()
    }

    pub fn lambda_max(&self, cfg: &SolverConfig) -> Result<f64> {
        gmd_solver::lambda_max(&self.gram, self.labels(), &self.partition, cfg)
    }

    pub fn fit(&self, cfg: &SolverConfig, init: Option<&CoefBlocks>) -> Result<ModelState> {
        let class_weights = cfg.resolved_class_weights(self.labels())?;
        let cfg = SolverConfig {
            class_weights: Some(class_weights),
            ..cfg.clone()
        };
        let (alpha, report) =
            gmd_solver::solve(&self.gram, self.labels(), &self.partition, &cfg, init)?;
        Ok(ModelState {
            alpha,
            train_features: self.standardized.samples().clone(),
            feature_names: self.standardized.feature_names().to_vec(),
            train_sample_ids: self.standardized.sample_ids().to_vec(),
            scaling: self.scaling.clone(),
            partition: self.partition.clone(),
            kernel: self.kernel.clone(),
            loss_params: CoherenceParams::new(cfg.sigma)?,
            lambda: cfg.lambda,
            class_weights,
            fit_intercept: cfg.fit_intercept,
            report,
        })
    }
}

/// Standardizes `data`, picks median-heuristic bandwidths unless `kernel` is
/// given, defaults to inverse-frequency class weights and runs the solver.
pub fn fit(
    data: &Dataset,
    partition: &GroupPartition,
    cfg: &SolverConfig,
    kernel: Option<&KernelSpec>,
) -> Result<ModelState> {
    PreparedFit::new(data, partition, kernel)?.fit(cfg, None)
}

/// `f(x) = sum_j sum_i alpha_ij K_j(x_i, x)` for each query row.
pub fn decision_function(model: &ModelState, query: &FeatureTable) -> Result<Vec<f64>> {
    let z = model.scale_query(query)?;
    model.decision_standardized(z.view())
}

/// Sign of the decision value; exact zeros go to -1.
pub fn classify(decisions: &[f64]) -> Vec<Label> {
    decisions
        .iter()
        .map(|&f| if f > 0.0 { 1 } else { -1 })
        .collect()
}

pub fn predict(model: &ModelState, query: &FeatureTable) -> Result<Vec<Label>> {
    Ok(classify(&decision_function(model, query)?))
}

#[derive(Serialize, Deserialize)]
struct PartitionGroupFile {
    name: String,
    features: Vec<usize>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    feature_names: Vec<String>,
    scaling: ScalingParams,
    partition: Vec<PartitionGroupFile>,
    gammas: Vec<f64>,
    sigma: f64,
    lambda: f64,
    class_weights: ClassWeights,
    fit_intercept: bool,
    intercept: f64,
    alpha: Vec<Vec<f64>>,
    train_features: Vec<Vec<f64>>,
    train_sample_ids: Vec<String>,
    report: SolveReport,
}

fn rows_to_matrix(rows: Vec<Vec<f64>>, ncols: usize, what: &str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Schema(format!(
            "{what} rows must all have length {ncols}"
        )));
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Schema(format!("{what}: {e}")))
}

impl ModelState {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            schema_version: SCHEMA_VERSION,
            feature_names: self.feature_names.clone(),
            scaling: self.scaling.clone(),
            partition: self
                .partition
                .groups()
                .iter()
                .zip(self.partition.names())
                .zip(self.partition.weights())
                .map(|((g, name), &weight)| PartitionGroupFile {
                    name: name.clone(),
                    features: g.clone(),
                    weight,
                })
                .collect(),
            gammas: self.kernel.gammas().to_vec(),
            sigma: self.loss_params.sigma(),
            lambda: self.lambda,
            class_weights: self.class_weights,
            fit_intercept: self.fit_intercept,
            intercept: self.alpha.intercept(),
            alpha: self
                .alpha
                .alpha()
                .outer_iter()
                .map(|r| r.to_vec())
                .collect(),
            train_features: self
                .train_features
                .outer_iter()
                .map(|r| r.to_vec())
                .collect(),
            train_sample_ids: self.train_sample_ids.clone(),
            report: self.report.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema("missing schema_version".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                found: version as u32,
                expected: SCHEMA_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        let p = file.feature_names.len();
        let train_features = rows_to_matrix(file.train_features, p, "train_features")?;
        let n = train_features.nrows();
        let alpha = rows_to_matrix(file.alpha, n, "alpha")?;
        let (groups, (names, weights)): (Vec<_>, (Vec<_>, Vec<_>)) = file
            .partition
            .into_iter()
            .map(|g| (g.features, (g.name, g.weight)))
            .unzip();
        let model = ModelState {
            alpha: CoefBlocks::new(alpha, file.intercept)
                .map_err(|e| Error::Schema(e.to_string()))?,
            train_features,
            feature_names: file.feature_names,
            train_sample_ids: file.train_sample_ids,
            scaling: file.scaling,
            partition: GroupPartition::new(groups, names, weights, p)
                .map_err(|e| Error::Schema(e.to_string()))?,
            kernel: KernelSpec::new(file.gammas).map_err(|e| Error::Schema(e.to_string()))?,
            loss_params: CoherenceParams::new(file.sigma)
                .map_err(|e| Error::Schema(e.to_string()))?,
            lambda: file.lambda,
            class_weights: file.class_weights,
            fit_intercept: file.fit_intercept,
            report: file.report,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save(model: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), model.to_json().as_bytes())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelState::from_json(&text)
}

/// Decision values of a model on its own training rows, from the stored
/// standardized features.
pub fn training_decisions(model: &ModelState) -> Result<Array1<f64>> {
    Ok(Array1::from(
        model.decision_standardized(model.train_features.view())?,
    ))
}

//! Tabular data ingestion, z-score scaling, feature groups and the synthetic
//! verification generator.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Class mark, always `-1` or `+1`.
pub type Label = i8;

/// Unlabelled feature matrix with column names and row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    samples: Array2<f64>,
    feature_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl FeatureTable {
    pub fn new(
        samples: Array2<f64>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = samples.dim();
        if feature_names.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{p} columns but {} feature names",
                feature_names.len()
            )));
        }
        if sample_ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} rows but {} sample ids",
                sample_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate feature name {name:?}"
                )));
            }
        }
        if let Some(((row, col), v)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidCell {
                row: row + 1,
                column: feature_names[col].clone(),
                value: v.to_string(),
            });
        }
        Ok(Self {
            samples,
            feature_names,
            sample_ids,
        })
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            samples: self.samples.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            samples: self.samples.select(Axis(1), cols),
            feature_names: cols
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            sample_ids: self.sample_ids.clone(),
        }
    }

    /// Reorders columns to follow `names`, failing if any is absent.
    pub fn align_to(&self, names: &[String]) -> Result<Self> {
        if self.feature_names == names {
            return Ok(self.clone());
        }
        let cols = names
            .iter()
            .map(|name| {
                self.column_index(name).ok_or_else(|| {
                    Error::DimensionMismatch(format!("query lacks feature column {name:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }
}

/// Feature table plus one ±1 label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: FeatureTable,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(features: FeatureTable, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != features.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                features.n_samples(),
                labels.len()
            )));
        }
        if let Some(row) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidLabel {
                row: row + 1,
                value: labels[row].to_string(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn from_parts(
        samples: Array2<f64>,
        labels: Vec<Label>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        Self::new(
            FeatureTable::new(samples, feature_names, sample_ids)?,
            labels,
        )
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn samples(&self) -> &Array2<f64> {
        self.features.samples()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        self.features.feature_names()
    }

    pub fn sample_ids(&self) -> &[String] {
        self.features.sample_ids()
    }

    pub fn n_samples(&self) -> usize {
        self.features.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            features: self.features.select_columns(cols),
            labels: self.labels.clone(),
        }
    }
}

/// Parses a label cell; `0` maps to `-1`.
pub fn parse_label(cell: &str) -> Option<Label> {
    let v: f64 = cell.trim().parse().ok()?;
    if v == 1.0 {
        Some(1)
    } else if v == -1.0 || v == 0.0 {
        Some(-1)
    } else {
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column holding class labels; `None` reads an unlabelled table.
    pub label_column: Option<String>,
    /// Column holding sample identifiers; rows are numbered from 1 otherwise.
    pub id_column: Option<String>,
    /// Columns to ignore entirely. Names absent from the header are skipped.
    pub skip_columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub features: FeatureTable,
    pub labels: Option<Vec<Label>>,
}

impl LoadedCsv {
    pub fn into_dataset(self) -> Result<Dataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::Csv("no label column was read".into()))?;
        Dataset::new(self.features, labels)
    }
}

/// Loads a labelled dataset. Every column except `label_column` must hold
/// finite reals.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let opts = CsvOptions {
        label_column: Some(label_column.to_string()),
        ..CsvOptions::default()
    };
    load_csv_with(path, &opts)?.into_dataset()
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut seen = HashSet::new();
    for (i, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::Csv(format!("header column {} is empty", i + 1)));
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::Csv(format!("duplicate header name {h:?}")));
        }
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("column {name:?} not found in header")))
    };
    let label_idx = opts.label_column.as_deref().map(find).transpose()?;
    let id_idx = opts.id_column.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| Some(i) != label_idx && Some(i) != id_idx)
        .filter(|&i| !opts.skip_columns.contains(&headers[i]))
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| Error::InvalidCell {
                row,
                column: headers[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidCell {
                    row,
                    column: headers[c].clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        if let Some(li) = label_idx {
            let cell = record.get(li).unwrap_or("");
            labels.push(parse_label(cell).ok_or_else(|| Error::InvalidLabel {
                row,
                value: cell.to_string(),
            })?);
        }
        ids.push(match id_idx {
            Some(ii) => record.get(ii).unwrap_or("").to_string(),
            None => row.to_string(),
        });
    }
    let n = ids.len();
    let samples = Array2::from_shape_vec((n, feature_cols.len()), values)
        .map_err(|e| Error::Csv(e.to_string()))?;
    Ok(LoadedCsv {
        features: FeatureTable::new(samples, feature_names, ids)?,
        labels: label_idx.map(|_| labels),
    })
}

/// Trimmed header names of a CSV file.
pub fn csv_headers(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    Ok(reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Csv(format!("{other:?}")),
        }
    } else {
        Error::Csv(e.to_string())
    }
}

/// Writes a table with optional id and label columns. Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn write_table_csv(
    path: impl AsRef<Path>,
    table: &FeatureTable,
    labels: Option<(&str, &[Label])>,
    id_column: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let mut header: Vec<&str> = Vec::new();
    if let Some(id) = id_column {
        header.push(id);
    }
    header.extend(table.feature_names().iter().map(String::as_str));
    if let Some((name, _)) = labels {
        header.push(name);
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in table.samples().outer_iter().enumerate() {
        let mut cells: Vec<String> = Vec::with_capacity(header.len());
        if id_column.is_some() {
            cells.push(table.sample_ids()[i].clone());
        }
        cells.extend(row.iter().map(|v| v.to_string()));
        if let Some((_, ys)) = labels {
            cells.push(ys[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_csv(
    path: impl AsRef<Path>,
    data: &Dataset,
    label_column: &str,
    id_column: Option<&str>,
) -> Result<()> {
    write_table_csv(
        path,
        data.features(),
        Some((label_column, data.labels())),
        id_column,
    )
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Per-column training statistics for z-scoring. A zero std marks a
/// constant column, which always maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalingParams {
    /// Mean and population (1/n) standard deviation of each column.
    pub fn fit(samples: ArrayView2<'_, f64>) -> Result<Self> {
        let (n, p) = samples.dim();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "standardization needs at least 2 rows, got {n}"
            )));
        }
        let mut means = Vec::with_capacity(p);
        let mut stds = Vec::with_capacity(p);
        for col in samples.axis_iter(Axis(1)) {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std <= 1e-12 * mean.abs().max(1.0) {
                0.0
            } else {
                std
            });
        }
        Ok(Self { means, stds })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn scale_value(&self, col: usize, x: f64) -> f64 {
        let s = self.stds[col];
        if s == 0.0 {
            0.0
        } else {
            (x - self.means[col]) / s
        }
    }

    pub fn unscale_value(&self, col: usize, z: f64) -> f64 {
        z * self.stds[col] + self.means[col]
    }

    pub fn apply(&self, samples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if samples.ncols() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "scaling has {} columns, data has {}",
                self.len(),
                samples.ncols()
            )));
        }
        let mut out = samples.to_owned();
        for mut row in out.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale_value(j, *v);
            }
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.means.len() != self.stds.len() {
            return Err(Error::Schema("scaling means/stds length differ".into()));
        }
        if self.stds.iter().chain(&self.means).any(|v| !v.is_finite())
            || self.stds.iter().any(|&s| s < 0.0)
        {
            return Err(Error::Schema(
                "scaling values must be finite, stds >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn standardize(data: &Dataset) -> Result<(Dataset, ScalingParams)> {
    let scaling = ScalingParams::fit(data.samples().view())?;
    let scaled = apply_scaling(data, &scaling)?;
    Ok((scaled, scaling))
}

pub fn apply_scaling(data: &Dataset, scaling: &ScalingParams) -> Result<Dataset> {
    Ok(Dataset {
        features: scale_table(data.features(), scaling)?,
        labels: data.labels.clone(),
    })
}

pub fn scale_table(table: &FeatureTable, scaling: &ScalingParams) -> Result<FeatureTable> {
    Ok(FeatureTable {
        samples: scaling.apply(table.samples().view())?,
        feature_names: table.feature_names.clone(),
        sample_ids: table.sample_ids.clone(),
    })
}

/// Disjoint groups of column indices covering every feature exactly once,
/// each with a name and a positive penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    names: Vec<String>,
    weights: Vec<f64>,
}

impl GroupPartition {
    pub fn new(
        groups: Vec<Vec<usize>>,
        names: Vec<String>,
        weights: Vec<f64>,
        n_features: usize,
    ) -> Result<Self> {
        let partition = Self {
            groups,
            names,
            weights,
        };
        partition.validate(n_features)?;
        Ok(partition)
    }

    /// Checks disjointness, coverage of `0..n_features`, names and weights.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let d = self.groups.len();
        if d == 0 {
            return Err(Error::InvalidPartition("no groups".into()));
        }
        if self.names.len() != d || self.weights.len() != d {
            return Err(Error::InvalidPartition(format!(
                "{d} groups but {} names and {} weights",
                self.names.len(),
                self.weights.len()
            )));
        }
        let mut names = HashSet::new();
        for name in &self.names {
            if !names.insert(name) {
                return Err(Error::InvalidPartition(format!(
                    "duplicate group name {name:?}"
                )));
            }
        }
        if let Some(j) = self
            .weights
            .iter()
            .position(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(Error::InvalidPartition(format!(
                "group {:?} weight must be positive, got {}",
                self.names[j], self.weights[j]
            )));
        }
        let mut owner = vec![None; n_features];
        for (j, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPartition(format!(
                    "group {:?} is empty",
                    self.names[j]
                )));
            }
            for &f in group {
                if f >= n_features {
                    return Err(Error::InvalidPartition(format!(
                        "feature index {f} out of range for {n_features} features"
                    )));
                }
                if let Some(k) = owner[f] {
                    return Err(Error::InvalidPartition(format!(
                        "feature {f} appears in groups {:?} and {:?}",
                        self.names[k], self.names[j]
                    )));
                }
                owner[f] = Some(j);
            }
        }
        if let Some(f) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidPartition(format!(
                "feature {f} belongs to no group"
            )));
        }
        Ok(())
    }

    /// One group per feature, unit weights.
    pub fn singletons(feature_names: &[String]) -> Self {
        Self {
            groups: (0..feature_names.len()).map(|j| vec![j]).collect(),
            names: feature_names.to_vec(),
            weights: vec![1.0; feature_names.len()],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_features(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn group_of(&self, feature: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&feature))
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        let n = self.n_features();
        self.weights = weights;
        self.validate(n)?;
        Ok(self)
    }

    /// Replaces every weight by sqrt(group size).
    pub fn with_sqrt_size_weights(mut self) -> Self {
        self.weights = self
            .groups
            .iter()
            .map(|g| (g.len() as f64).sqrt())
            .collect();
        self
    }

    /// Builds a partition from a JSON group configuration, resolving feature
    /// names against `feature_names`.
    pub fn from_config(config: &GroupConfig, feature_names: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut groups = Vec::with_capacity(config.groups.len());
        let mut names = Vec::with_capacity(config.groups.len());
        let mut weights = Vec::with_capacity(config.groups.len());
        for spec in &config.groups {
            let members = spec
                .features
                .iter()
                .map(|f| {
                    index.get(f.as_str()).copied().ok_or_else(|| {
                        Error::InvalidPartition(format!(
                            "group {:?} names unknown feature {f:?}",
                            spec.name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let weight = match (spec.weight, config.default_weight) {
                (Some(w), _) => w,
                (None, WeightMode::SqrtSize) => (members.len() as f64).sqrt(),
                (None, WeightMode::Unit) => 1.0,
            };
            groups.push(members);
            names.push(spec.name.clone());
            weights.push(weight);
        }
        Self::new(groups, names, weights, feature_names.len())
    }

    pub fn to_config(&self, feature_names: &[String]) -> GroupConfig {
        GroupConfig {
            groups: self
                .groups
                .iter()
                .zip(&self.names)
                .zip(&self.weights)
                .map(|((g, name), &w)| GroupSpec {
                    name: name.clone(),
                    features: g.iter().map(|&i| feature_names[i].clone()).collect(),
                    weight: Some(w),
                })
                .collect(),
            default_weight: WeightMode::Unit,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Unit,
    SqrtSize,
}

/// `{"groups": [{"name": .., "features": [..], "weight": ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub groups: Vec<GroupSpec>,
    /// Weight used by groups that omit one.
    #[serde(default, skip_serializing_if = "is_unit")]
    pub default_weight: WeightMode,
}

fn is_unit(mode: &WeightMode) -> bool {
    *mode == WeightMode::Unit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub features: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl GroupConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("group config {}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("group config serializes");
        write_file(path.as_ref(), text.as_bytes())
    }

    /// Drops features not in `keep` and removes groups left empty.
    pub fn restrict_to(&self, keep: &[String]) -> Self {
        let keep: BTreeSet<&str> = keep.iter().map(String::as_str).collect();
        Self {
            groups: self
                .groups
                .iter()
                .filter_map(|g| {
                    let features: Vec<String> = g
                        .features
                        .iter()
                        .filter(|f| keep.contains(f.as_str()))
                        .cloned()
                        .collect();
                    (!features.is_empty()).then(|| GroupSpec {
                        name: g.name.clone(),
                        features,
                        weight: g.weight,
                    })
                })
                .collect(),
            default_weight: self.default_weight,
        }
    }
}

pub const SYNTH_FEATURES: usize = 12;
pub const SYNTH_GROUPS: usize = 4;

#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    pub partition: GroupPartition,
    /// Indices (0-based) of the groups the latent score depends on.
    pub truth: Vec<usize>,
}

/// Latent score of the synthetic generator for one 12-feature row.
pub fn synth_score(x: &[f64]) -> f64 {
    (2.0 * x[0]).sin() + x[1] * x[1] - 1.0 + 0.8 * x[3] * x[4]
}

/// Synthetic benchmark: 12 standard-normal features `x1..x12` in four groups
/// of three. Only groups 1 and 2 drive the latent score
/// `sin(2 x1) + x2^2 - 1 + 0.8 x4 x5`; the label is the sign of the score
/// plus Gaussian noise with std `noise * std(score)`, ties going to -1.
///
/// Draw order from [`SplitMix64`]: all features row-major, then one noise
/// normal per row (drawn even when `noise == 0`).
pub fn synth_generate(n: usize, seed: u64, noise: f64) -> Result<SynthData> {
    if n < 40 {
        return Err(Error::InsufficientData(format!(
            "synthetic generator needs n >= 40, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::InvalidParameter(format!(
            "noise must lie in [0, 1), got {noise}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let samples = Array2::from_shape_simple_fn((n, SYNTH_FEATURES), || rng.standard_normal());
    let scores: Vec<f64> = samples
        .outer_iter()
        .map(|row| synth_score(row.as_slice().expect("standard layout")))
        .collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let labels = scores
        .iter()
        .map(|&s| {
            let eps = rng.standard_normal() * noise * sd;
            if s + eps > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let feature_names = (1..=SYNTH_FEATURES).map(|i| format!("x{i}")).collect();
    let sample_ids = (1..=n).map(|i| format!("s{i:04}")).collect();
    let dataset = Dataset::from_parts(samples, labels, feature_names, sample_ids)?;
    let partition = GroupPartition::new(
        (0..SYNTH_GROUPS)
            .map(|g| (3 * g..3 * g + 3).collect())
            .collect(),
        (1..=SYNTH_GROUPS).map(|g| format!("group{g}")).collect(),
        vec![1.0; SYNTH_GROUPS],
        SYNTH_FEATURES,
    )?;
    Ok(SynthData {
        dataset,
        partition,
        truth: vec![0, 1],
    })
}

//! Group-level interpretation of a fitted model: component functions,
//! group importance and partial dependence curves.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::{write_file, FeatureTable};
use crate::error::{Error, Result};
use crate::model::ModelState;

/// Norm used for a group's contribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionNorm {
    /// Root-mean-square of the component over the training rows.
    #[default]
    Empirical,
    /// `sqrt(alpha_j^T K_j alpha_j)`.
    Rkhs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupImportance {
    pub group_id: usize,
    pub group: String,
    pub contribution: f64,
    pub normalized_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdCurve {
    pub group_id: usize,
    pub feature_name: String,
    /// Feature values in original units, strictly increasing.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Values (original units) held fixed for the other features of the group.
    pub reference: Vec<(String, f64)>,
}

fn check_group(model: &ModelState, j: usize) -> Result<()> {
    if j >= model.partition().n_groups() {
        return Err(Error::InvalidParameter(format!(
            "group index {j} out of range for {} groups",
            model.partition().n_groups()
        )));
    }
    Ok(())
}

/// Values of group `j`'s component function at each query row.
pub fn component_values(model: &ModelState, query: &FeatureTable, j: usize) -> Result<Vec<f64>> {
    check_group(model, j)?;
    Ok(all_component_values(model, query)?.row(j).to_vec())
}

/// All component values, `d x m`.
pub fn all_component_values(model: &ModelState, query: &FeatureTable) -> Result<Array2<f64>> {
    let z = model.scale_query(query)?;
    model.components_standardized(z.view())
}

pub fn group_contribution(model: &ModelState) -> Result<Vec<GroupImportance>> {
    group_contribution_with(model, ContributionNorm::Empirical)
}

pub fn group_contribution_with(
    model: &ModelState,
    norm: ContributionNorm,
) -> Result<Vec<GroupImportance>> {
    let d = model.partition().n_groups();
    let contributions: Vec<f64> = match norm {
        ContributionNorm::Empirical => {
            let comps = model.components_standardized(model.train_features().view())?;
            let n = comps.ncols().max(1) as f64;
            comps
                .outer_iter()
                .map(|row| (row.dot(&row) / n).sqrt())
                .collect()
        }
        ContributionNorm::Rkhs => (0..d)
            .map(|j| {
                let a = model.alpha().block(j);
                if a.iter().all(|&v| v == 0.0) {
                    return 0.0;
                }
                let cols = model.partition().group(j);
                let sub = model.train_features().select(ndarray::Axis(1), cols);
                let ka = model
                    .group_component_at(j, sub.view())
                    .expect("group columns match");
                a.iter()
                    .zip(&ka)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    .max(0.0)
                    .sqrt()
            })
            .collect(),
    };
    let total: f64 = contributions.iter().sum();
    Ok(contributions
        .into_iter()
        .enumerate()
        .map(|(j, c)| GroupImportance {
            group_id: j,
            group: model.partition().names()[j].clone(),
            contribution: c,
            normalized_share: if total > 0.0 { c / total } else { 0.0 },
        })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Group `j`'s component as `feature` sweeps `grid_size` evenly spaced values
/// between its training min and max, other in-group features held at their
/// training medians. `train` is in original units.
pub fn partial_dependence(
    model: &ModelState,
    train: &FeatureTable,
    j: usize,
    feature: &str,
    grid_size: usize,
) -> Result<PdCurve> {
    check_group(model, j)?;
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be at least 2, got {grid_size}"
        )));
    }
    let train = train.align_to(model.feature_names())?;
    let cols = model.partition().group(j);
    let target = model
        .feature_names()
        .iter()
        .position(|n| n == feature)
        .filter(|c| cols.contains(c))
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "feature {feature:?} is not in group {:?}",
                model.partition().names()[j]
            ))
        })?;
    let column = train.samples().column(target);
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "feature {feature:?} is constant on the training data"
        )));
    }
    let mut grid: Vec<f64> = (0..grid_size)
        .map(|t| lo + (hi - lo) * t as f64 / (grid_size - 1) as f64)
        .collect();
    grid[grid_size - 1] = hi;

    let reference: Vec<(String, f64)> = cols
        .iter()
        .filter(|&&c| c != target)
        .map(|&c| {
            let mut v = train.samples().column(c).to_vec();
            (model.feature_names()[c].clone(), median(&mut v))
        })
        .collect();

    let scaling = model.scaling();
    let mut points = Array2::zeros((grid_size, cols.len()));
    for (g, &x) in grid.iter().enumerate() {
        let mut refs = reference.iter();
        for (k, &c) in cols.iter().enumerate() {
            let raw = if c == target {
                x
            } else {
                refs.next().expect("one reference per co-feature").1
            };
            points[[g, k]] = scaling.scale_value(c, raw);
        }
    }
    let values = model.group_component_at(j, points.view())?;
    Ok(PdCurve {
        group_id: j,
        feature_name: feature.to_string(),
        grid,
        values,
        reference,
    })
}

#[derive(Debug, Clone, Default)]
pub struct ExportOptions {
    pub grid_size: usize,
    /// Also write per-sample component values (`component_scatter.csv`).
    pub scatter: bool,
    /// Add the RKHS-norm contribution as an extra importance column.
    pub rkhs: bool,
}

impl ExportOptions {
    pub fn new() -> Self {
        Self {
            grid_size: 50,
            scatter: false,
            rkhs: false,
        }
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn pd_file_name(group: &str, feature: &str) -> String {
    format!("pd_{}__{}.csv", sanitize(group), sanitize(feature))
}

pub fn write_pd_csv(path: &Path, curve: &PdCurve) -> Result<()> {
    let mut out = String::from("grid,value\n");
    for (g, v) in curve.grid.iter().zip(&curve.values) {
        out.push_str(&format!("{g},{v}\n"));
    }
    write_file(path, out.as_bytes())
}

/// Reads a `grid,value` CSV back into its two columns.
pub fn read_pd_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("grid,value") {
        return Err(Error::Csv(format!(
            "{}: expected header grid,value",
            path.display()
        )));
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let (g, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Csv(format!("{}: malformed line {}", path.display(), i + 2)))?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::InvalidCell {
                row: i + 1,
                column: path.display().to_string(),
                value: s.to_string(),
            })
        };
        grid.push(parse(g)?);
        values.push(parse(v)?);
    }
    Ok((grid, values))
}

/// `group,contribution,share` rows; `fold` prepends a fold column.
pub fn importance_csv(rows: &[(Option<usize>, &[GroupImportance])]) -> String {
    let with_fold = rows.iter().any(|(f, _)| f.is_some());
    let mut out = String::from(if with_fold {
        "group,contribution,share,fold\n"
    } else {
        "group,contribution,share\n"
    });
    for (fold, imps) in rows {
        for imp in *imps {
            out.push_str(&format!(
                "{},{},{}",
                imp.group, imp.contribution, imp.normalized_share
            ));
            if let Some(f) = fold {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Writes one PD curve per (group, feature), `group_importance.csv`, and
/// optionally `component_scatter.csv`. Constant features get no curve.
/// Returns the written paths in order.
pub fn export_interpretation(
    model: &ModelState,
    train: &FeatureTable,
    out_dir: impl AsRef<Path>,
    opts: &ExportOptions,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let grid_size = if opts.grid_size == 0 {
        50
    } else {
        opts.grid_size
    };
    let mut written = Vec::new();
    let partition = model.partition();
    for (j, cols) in partition.groups().iter().enumerate() {
        for &c in cols {
            let feature = &model.feature_names()[c];
            let curve = match partial_dependence(model, train, j, feature, grid_size) {
                Ok(curve) => curve,
                Err(Error::InvalidParameter(_)) => continue,
                Err(e) => return Err(e),
            };
            let path = out_dir.join(pd_file_name(&partition.names()[j], feature));
            write_pd_csv(&path, &curve)?;
            written.push(path);
        }
    }

    let importance = group_contribution(model)?;
    let mut text = importance_csv(&[(None, &importance)]);
    if opts.rkhs {
        let rkhs = group_contribution_with(model, ContributionNorm::Rkhs)?;
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[0].push_str(",rkhs_contribution");
        for (line, imp) in lines.iter_mut().skip(1).zip(&rkhs) {
            line.push_str(&format!(",{}", imp.contribution));
        }
        text = lines.join("\n") + "\n";
    }
    let path = out_dir.join("group_importance.csv");
    write_file(&path, text.as_bytes())?;
    written.push(path);

    if opts.scatter {
        let comps = all_component_values(model, train)?;
        let aligned = train.align_to(model.feature_names())?;
        let mut out = String::from("sample_id,group,feature,value,component\n");
        for (j, cols) in partition.groups().iter().enumerate() {
            for &c in cols {
                for (i, id) in aligned.sample_ids().iter().enumerate() {
                    out.push_str(&format!(
                        "{id},{},{},{},{}\n",
                        partition.names()[j],
                        model.feature_names()[c],
                        aligned.samples()[[i, c]],
                        comps[[j, i]]
                    ));
                }
            }
        }
        let path = out_dir.join("component_scatter.csv");
        write_file(&path, out.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

//! Metrics, stratified cross-validation, grid search, correlation tables and
//! paired t-tests.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataio::{Dataset, GroupPartition, Label};
use crate::error::{Error, Result};
use crate::gmd_solver::{CoefBlocks, SolverConfig};
use crate::interpret::{group_contribution, GroupImportance};
use crate::kernels::GammaMode;
use crate::model::{classify, decision_function, PreparedFit};
use crate::rng::SplitMix64;
use crate::selection::log_grid;

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half. Computed from mid-ranks, which gives the same
/// number as counting pairs.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {i} is NaN")));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of the positives keeps every quantity integral
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1..=end, doubled mid-rank = start + end + 1
        let doubled = (start + end + 1) as u64;
        let pos_in_run = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count() as u64;
        twice_rank_sum += doubled * pos_in_run;
        start = end;
    }
    let n_pos = n_pos as u64;
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg as u64) as f64)
}

/// Accuracy and F1 for class +1, both as percentages. F1 is 0 when there
/// are no true positives but some error on the positive class, and 100 when
/// neither labels nor predictions contain a positive.
pub fn accuracy_f1(predictions: &[Label], labels: &[Label]) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("no samples to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut agree) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p == 1, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if p == y {
            agree += 1;
        }
    }
    let accuracy = 100.0 * agree as f64 / labels.len() as f64;
    let f1 = if tp == 0 {
        if fp + fn_ == 0 {
            100.0
        } else {
            0.0
        }
    } else {
        100.0 * 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok((accuracy, f1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auroc: f64,
    /// Percent.
    pub accuracy: f64,
    /// Percent, positive class +1.
    pub f1: f64,
}

impl MetricSet {
    /// Scores decisions thresholded at zero (ties to -1).
    pub fn from_decisions(decisions: &[f64], labels: &[Label]) -> Result<Self> {
        let auroc = auroc(decisions, labels)?;
        let (accuracy, f1) = accuracy_f1(&classify(decisions), labels)?;
        Ok(Self {
            auroc,
            accuracy,
            f1,
        })
    }

    /// Mean and population standard deviation across `sets`.
    pub fn summarize(sets: &[MetricSet]) -> (MetricSet, MetricSet) {
        let k = sets.len().max(1) as f64;
        let pick = |f: fn(&MetricSet) -> f64| -> (f64, f64) {
            let mean = sets.iter().map(f).sum::<f64>() / k;
            let var = sets.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / k;
            (mean, var.sqrt())
        };
        let (a, sa) = pick(|s| s.auroc);
        let (c, sc) = pick(|s| s.accuracy);
        let (f, sf) = pick(|s| s.f1);
        (
            MetricSet {
                auroc: a,
                accuracy: c,
                f1: f,
            },
            MetricSet {
                auroc: sa,
                accuracy: sc,
                f1: sf,
            },
        )
    }
}

/// Fold index per sample. Each class is shuffled and dealt round-robin; the
/// dealing position carries over from positives to negatives so total fold
/// sizes stay within one of each other.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos < k || n_neg < k {
        return Err(Error::InsufficientData(format!(
            "{k} folds need at least {k} samples per class, have {n_pos} positive and {n_neg} negative"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in [1, -1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        for (t, &i) in members.iter().enumerate() {
            folds[i] = (offset + t) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(folds)
}

/// Splits rows into `(train, holdout)` index lists, holding out
/// `round(fraction * n_class)` rows of each class at random. Both lists are
/// sorted.
pub fn stratified_holdout(
    labels: &[Label],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut holdout = Vec::new();
    for class in [1, -1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        let take = (fraction * members.len() as f64).round() as usize;
        holdout.extend_from_slice(&members[..take]);
    }
    holdout.sort_unstable();
    let train = (0..labels.len())
        .filter(|i| holdout.binary_search(i).is_err())
        .collect();
    Ok((train, holdout))
}

fn fold_split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub folds: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub gamma: GammaMode,
    pub per_fold: Vec<MetricSet>,
    pub mean: MetricSet,
    pub sd: MetricSet,
    pub sample_ids: Vec<String>,
    pub fold_assignments: Vec<usize>,
    /// Held-out decision value of every sample.
    pub decisions: Vec<f64>,
    pub per_fold_group_importance: Vec<Vec<GroupImportance>>,
    pub per_fold_active_groups: Vec<Vec<String>>,
}

impl CvReport {
    /// Mean contribution of each group across folds.
    pub fn mean_group_contribution(&self) -> Vec<f64> {
        let d = self.per_fold_group_importance.first().map_or(0, Vec::len);
        let k = self.per_fold_group_importance.len().max(1) as f64;
        (0..d)
            .map(|j| {
                self.per_fold_group_importance
                    .iter()
                    .map(|fold| fold[j].contribution)
                    .sum::<f64>()
                    / k
            })
            .collect()
    }
}

struct FoldOutcome {
    metrics: MetricSet,
    test: Vec<usize>,
    decisions: Vec<f64>,
    importance: Vec<GroupImportance>,
    active: Vec<String>,
}

/// Stratified `k`-fold evaluation: every fold is fitted on the other folds
/// (standardization and bandwidths included) and scored on its own rows.
pub fn cross_validate(
    data: &Dataset,
    partition: &GroupPartition,
    cfg: &SolverConfig,
    gamma: GammaMode,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let folds = stratified_kfold(data.labels(), k, seed)?;
    let mut report = cross_validate_with_folds(data, partition, cfg, gamma, &folds)?;
    report.seed = seed;
    Ok(report)
}

/// As [`cross_validate`] with caller-supplied fold indices `0..k`. `seed`
/// in the report is 0.
pub fn cross_validate_with_folds(
    data: &Dataset,
    partition: &GroupPartition,
    cfg: &SolverConfig,
    gamma: GammaMode,
    folds: &[usize],
) -> Result<CvReport> {
    cfg.validate()?;
    partition.validate(data.n_features())?;
    if folds.len() != data.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} fold indices for {} samples",
            folds.len(),
            data.n_samples()
        )));
    }
    let k = folds.iter().max().map_or(0, |m| m + 1);
    if k < 2 || (0..k).any(|f| !folds.contains(&f)) {
        return Err(Error::InvalidParameter(
            "fold indices must cover 0..k with k >= 2".into(),
        ));
    }
    let outcomes: Vec<FoldOutcome> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = fold_split(folds, f);
            let train_data = data.select_rows(&train);
            let test_data = data.select_rows(&test);
            let model =
                PreparedFit::with_gamma_mode(&train_data, partition, gamma)?.fit(cfg, None)?;
            let decisions = decision_function(&model, test_data.features())?;
            Ok(FoldOutcome {
                metrics: MetricSet::from_decisions(&decisions, test_data.labels())?,
                test,
                decisions,
                importance: group_contribution(&model)?,
                active: model.active_group_names(),
            })
        })
        .collect::<Result<_>>()?;

    let mut decisions = vec![0.0; data.n_samples()];
    for o in &outcomes {
        for (&i, &v) in o.test.iter().zip(&o.decisions) {
            decisions[i] = v;
        }
    }
    let per_fold: Vec<MetricSet> = outcomes.iter().map(|o| o.metrics).collect();
    let (mean, sd) = MetricSet::summarize(&per_fold);
    Ok(CvReport {
        seed: 0,
        folds: k,
        lambda: cfg.lambda,
        sigma: cfg.sigma,
        gamma,
        per_fold,
        mean,
        sd,
        sample_ids: data.sample_ids().to_vec(),
        fold_assignments: folds.to_vec(),
        decisions,
        per_fold_group_importance: outcomes.iter().map(|o| o.importance.clone()).collect(),
        per_fold_active_groups: outcomes.into_iter().map(|o| o.active).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub sigma: f64,
    pub gamma: GammaMode,
    pub mean_auroc: f64,
    pub sd_auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub seed: u64,
    pub folds: usize,
    pub points: Vec<GridPoint>,
    pub best: GridPoint,
}

/// Grid ordering: higher mean AUROC, then larger lambda, then larger sigma.
/// Earlier gamma modes win any remaining tie.
fn better(a: &GridPoint, b: &GridPoint) -> bool {
    if a.mean_auroc != b.mean_auroc {
        return a.mean_auroc > b.mean_auroc;
    }
    if a.lambda != b.lambda {
        return a.lambda > b.lambda;
    }
    a.sigma > b.sigma
}

/// Mean held-out AUROC at every `(lambda, sigma, gamma)` combination. Within
/// a fold and `(sigma, gamma)` the lambdas are visited from largest to
/// smallest, each solve starting from the previous solution. `base` supplies
/// the remaining solver settings.
pub fn grid_search(
    data: &Dataset,
    partition: &GroupPartition,
    lambdas: &[f64],
    sigmas: &[f64],
    gammas: &[GammaMode],
    base: &SolverConfig,
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    if lambdas.is_empty() || sigmas.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidParameter(
            "grid axes must be non-empty".into(),
        ));
    }
    partition.validate(data.n_features())?;
    let mut lambda_order: Vec<usize> = (0..lambdas.len()).collect();
    lambda_order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    for &sigma in sigmas {
        base.with_lambda(lambdas[0]).validate()?;
        SolverConfig {
            sigma,
            ..base.clone()
        }
        .validate()?;
    }
    for &l in lambdas {
        base.with_lambda(l).validate()?;
    }

    let folds = stratified_kfold(data.labels(), k, seed)?;
    let n_points = gammas.len() * sigmas.len() * lambdas.len();
    let index = |g: usize, s: usize, l: usize| (g * sigmas.len() + s) * lambdas.len() + l;

    // per fold: AUROC at every grid point
    let scores: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = fold_split(&folds, f);
            let train_data = data.select_rows(&train);
            let test_data = data.select_rows(&test);
            let mut out = vec![0.0; n_points];
            for (g, &mode) in gammas.iter().enumerate() {
                let prepared = PreparedFit::with_gamma_mode(&train_data, partition, mode)?;
                for (s, &sigma) in sigmas.iter().enumerate() {
                    let mut warm: Option<CoefBlocks> = None;
                    for &l in &lambda_order {
                        let cfg = SolverConfig {
                            lambda: lambdas[l],
                            sigma,
                            ..base.clone()
                        };
                        let model = prepared.fit(&cfg, warm.as_ref())?;
                        let decisions = decision_function(&model, test_data.features())?;
                        out[index(g, s, l)] = auroc(&decisions, test_data.labels())?;
                        warm = Some(model.alpha().clone());
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(n_points);
    for (g, &gamma) in gammas.iter().enumerate() {
        for (s, &sigma) in sigmas.iter().enumerate() {
            for (l, &lambda) in lambdas.iter().enumerate() {
                let values: Vec<f64> = scores.iter().map(|fold| fold[index(g, s, l)]).collect();
                let mean = values.iter().sum::<f64>() / k as f64;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
                points.push(GridPoint {
                    lambda,
                    sigma,
                    gamma,
                    mean_auroc: mean,
                    sd_auroc: var.sqrt(),
                });
            }
        }
    }
    let mut best = points[0];
    for p in &points[1..] {
        if better(p, &best) {
            best = *p;
        }
    }
    Ok(GridResult {
        seed,
        folds: k,
        points,
        best,
    })
}

pub const DEFAULT_SIGMAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_LAMBDA_COUNT: usize = 20;
pub const DEFAULT_LAMBDA_FLOOR: f64 = 1e-4;

/// Twenty log-spaced lambdas from the largest full-data `lambda_max` over
/// `sigmas` and `gammas` down to 1e-4.
pub fn default_lambda_grid(
    data: &Dataset,
    partition: &GroupPartition,
    sigmas: &[f64],
    gammas: &[GammaMode],
    base: &SolverConfig,
) -> Result<Vec<f64>> {
    let mut top = 0.0f64;
    for &mode in gammas {
        let prepared = PreparedFit::with_gamma_mode(data, partition, mode)?;
        for &sigma in sigmas {
            top = top.max(prepared.lambda_max(&SolverConfig {
                sigma,
                ..base.clone()
            })?);
        }
    }
    if top <= DEFAULT_LAMBDA_FLOOR {
        return Ok(vec![DEFAULT_LAMBDA_FLOOR]);
    }
    Ok(log_grid(top, DEFAULT_LAMBDA_FLOOR, DEFAULT_LAMBDA_COUNT))
}

/// Pearson r between every column of `a` and every column of `b`; `None`
/// where either column is constant.
pub fn pearson_matrix(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<Array2<Option<f64>>> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} rows against {} rows",
            b.nrows()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs n >= 3, got {n}"
        )));
    }
    let center = |m: ArrayView2<'_, f64>| -> (Array2<f64>, Vec<f64>) {
        let mean = m.mean_axis(ndarray::Axis(0)).expect("n >= 3");
        let c = &m - &mean;
        let norms = c
            .columns()
            .into_iter()
            .map(|col| col.dot(&col).sqrt())
            .collect();
        (c, norms)
    };
    let (ca, na) = center(a);
    let (cb, nb) = center(b);
    Ok(Array2::from_shape_fn((a.ncols(), b.ncols()), |(j, k)| {
        if na[j] == 0.0 || nb[k] == 0.0 {
            return None;
        }
        let r = ca.column(j).dot(&cb.column(k)) / (na[j] * nb[k]);
        Some(r.clamp(-1.0, 1.0))
    }))
}

fn format_r(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Matrix layout: header `feature,<col names...>`, one row per row name.
pub fn pearson_csv(r: &Array2<Option<f64>>, row_names: &[String], col_names: &[String]) -> String {
    let mut out = String::from("feature");
    for c in col_names {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (j, name) in row_names.iter().enumerate() {
        out.push_str(name);
        for k in 0..col_names.len() {
            out.push(',');
            out.push_str(&format_r(r[[j, k]]));
        }
        out.push('\n');
    }
    out
}

/// Long layout: `feature,characteristic,r`.
pub fn pearson_long_csv(
    r: &Array2<Option<f64>>,
    row_names: &[String],
    col_names: &[String],
) -> String {
    let mut out = String::from("feature,characteristic,r\n");
    for (j, rn) in row_names.iter().enumerate() {
        for (k, cn) in col_names.iter().enumerate() {
            out.push_str(&format!("{rn},{cn},{}\n", format_r(r[[j, k]])));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    /// All differences equal and nonzero: p taken as 0.
    ConstantShift,
    /// All differences zero: p taken as 1.
    Identical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub degenerate: Option<Degenerate>,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} against {} observations",
            a.len(),
            b.len()
        )));
    }
    let k = a.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "paired t-test needs k >= 2, got {k}"
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite observation".into()));
    }
    let df = k - 1;
    let mean = d.iter().sum::<f64>() / k as f64;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / df as f64).sqrt();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || mean.abs() <= 1e-12 * scale && sd <= 1e-12 * scale {
        return Ok(TTest {
            t: 0.0,
            df,
            p: 1.0,
            degenerate: Some(Degenerate::Identical),
        });
    }
    if sd <= 1e-12 * scale {
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            df,
            p: 0.0,
            degenerate: Some(Degenerate::ConstantShift),
        });
    }
    let t = mean / (sd / (k as f64).sqrt());
    let dist =
        StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        df,
        p,
        degenerate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth_generate;
    use ndarray::array;

    fn brute_auroc(scores: &[f64], labels: &[Label]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == -1 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / pairs
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.1], &[1, -1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.8, 0.4, 0.6, 0.2], &[1, 1, -1, -1]).unwrap(), 0.75);
        assert_eq!(auroc(&[3.0; 5], &[1, -1, 1, -1, -1]).unwrap(), 0.5);
        assert!(matches!(
            auroc(&[1.0, 2.0], &[1, 1]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn auroc_equals_pair_counting() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let n = 2 + rng.below(29);
            let mut labels: Vec<Label> = (0..n)
                .map(|_| if rng.next_f64() < 0.4 { 1 } else { -1 })
                .collect();
            labels[0] = 1;
            labels[1] = -1;
            // coarse scores force ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.below(6)) as f64 * 0.25).collect();
            assert_eq!(
                auroc(&scores, &labels).unwrap(),
                brute_auroc(&scores, &labels)
            );
            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            assert_eq!(
                auroc(&scores, &labels).unwrap() + auroc(&flipped, &labels).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn accuracy_f1_conventions() {
        assert_eq!(
            accuracy_f1(&[1, -1, 1], &[1, -1, 1]).unwrap(),
            (100.0, 100.0)
        );
        let labels = [1, 1, 1, -1, -1, -1, -1, -1, -1, -1];
        let preds = [1, 1, -1, 1, -1, -1, -1, -1, -1, -1];
        let (acc, f1) = accuracy_f1(&preds, &labels).unwrap();
        assert_eq!(acc, 80.0);
        assert!((f1 - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(accuracy_f1(&[-1, -1, -1], &[1, -1, -1]).unwrap().1, 0.0);
        assert_eq!(accuracy_f1(&[-1, -1], &[-1, -1]).unwrap().1, 100.0);
        assert!(accuracy_f1(&[1], &[1, -1]).is_err());
    }

    #[test]
    fn stratified_folds_keep_class_ratio() {
        let labels: Vec<Label> = (0..500).map(|i| if i % 25 < 3 { 1 } else { -1 }).collect();
        assert_eq!(labels.iter().filter(|&&y| y == 1).count(), 60);
        let folds = stratified_kfold(&labels, 5, 42).unwrap();
        for f in 0..5 {
            let pos = (0..500)
                .filter(|&i| folds[i] == f && labels[i] == 1)
                .count();
            let neg = (0..500)
                .filter(|&i| folds[i] == f && labels[i] == -1)
                .count();
            assert_eq!((pos, neg), (12, 88));
        }
        assert_eq!(folds, stratified_kfold(&labels, 5, 42).unwrap());
        assert_ne!(folds, stratified_kfold(&labels, 5, 43).unwrap());
    }

    #[test]
    fn stratified_folds_uneven_sizes() {
        let labels: Vec<Label> = (0..23).map(|i| if i < 7 { 1 } else { -1 }).collect();
        let folds = stratified_kfold(&labels, 3, 1).unwrap();
        for class in [1, -1] {
            let sizes: Vec<usize> = (0..3)
                .map(|f| {
                    (0..23)
                        .filter(|&i| folds[i] == f && labels[i] == class)
                        .count()
                })
                .collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        let totals: Vec<usize> = (0..3)
            .map(|f| folds.iter().filter(|&&x| x == f).count())
            .collect();
        assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 1);
    }

    #[test]
    fn holdout_keeps_class_ratio() {
        let labels: Vec<Label> = (0..500).map(|i| if i % 25 < 3 { 1 } else { -1 }).collect();
        let (train, hold) = stratified_holdout(&labels, 0.1, 3).unwrap();
        assert_eq!(hold.len(), 50);
        assert_eq!(hold.iter().filter(|&&i| labels[i] == 1).count(), 6);
        assert_eq!(train.len() + hold.len(), 500);
        assert!(train.iter().all(|i| hold.binary_search(i).is_err()));
        assert_eq!(
            stratified_holdout(&labels, 0.0, 3).unwrap().1,
            Vec::<usize>::new()
        );
        assert!(stratified_holdout(&labels, 1.0, 3).is_err());
    }

    #[test]
    fn stratified_folds_need_k_per_class() {
        let labels: Vec<Label> = (0..10).map(|i| if i < 2 { 1 } else { -1 }).collect();
        assert!(stratified_kfold(&labels, 5, 0).is_err());
        assert!(stratified_kfold(&labels, 2, 0).is_ok());
    }

    fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for i in 0..x.len() {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn pearson_examples_and_oracle() {
        let a = array![[1.0], [2.0], [3.0]];
        let b = array![[6.0, 5.0], [4.0, 5.0], [2.0, 5.0]];
        let r = pearson_matrix(a.view(), b.view()).unwrap();
        assert!((r[[0, 0]].unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(r[[0, 1]], None);
        assert!((pearson_matrix(a.view(), a.view()).unwrap()[[0, 0]].unwrap() - 1.0).abs() < 1e-15);

        let mut rng = SplitMix64::new(5);
        let a = Array2::from_shape_simple_fn((5, 2), || rng.standard_normal());
        let b = Array2::from_shape_simple_fn((5, 3), || rng.standard_normal());
        let r = pearson_matrix(a.view(), b.view()).unwrap();
        for j in 0..2 {
            for k in 0..3 {
                let want = naive_pearson(&a.column(j).to_vec(), &b.column(k).to_vec());
                assert!((r[[j, k]].unwrap() - want).abs() < 1e-12);
            }
        }
        assert!(
            pearson_matrix(a.slice(ndarray::s![..2, ..]), b.slice(ndarray::s![..2, ..])).is_err()
        );
    }

    #[test]
    fn pearson_csv_layouts() {
        let r = Array2::from_shape_vec((1, 2), vec![Some(0.5), None]).unwrap();
        let rows = vec!["f".to_string()];
        let cols = vec!["a".to_string(), "b".to_string()];
        assert_eq!(pearson_csv(&r, &rows, &cols), "feature,a,b\nf,0.5,NA\n");
        assert_eq!(
            pearson_long_csv(&r, &rows, &cols),
            "feature,characteristic,r\nf,a,0.5\nf,b,NA\n"
        );
    }

    /// Two-sided p for Student t with 4 degrees of freedom, by Simpson
    /// quadrature of the density `0.375 (1 + t^2/4)^-2.5` on [0, |t|].
    fn t4_two_sided(t: f64) -> f64 {
        let steps = 20_000;
        let h = t.abs() / steps as f64;
        let dens = |x: f64| 0.375 * (1.0 + x * x / 4.0).powf(-2.5);
        let mut s = dens(0.0) + dens(t.abs());
        for i in 1..steps {
            s += dens(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn paired_ttest_reference_value() {
        let a = [0.02, 0.01, 0.03, 0.00, 0.04];
        let b = [0.0; 5];
        let r = paired_ttest(&a, &b).unwrap();
        assert!((r.t - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(r.df, 4);
        assert!((r.p - t4_two_sided(r.t)).abs() < 1e-8);
        assert!((r.p - 0.0474).abs() < 5e-4);
        let neg = paired_ttest(&b, &a).unwrap();
        assert!((neg.t + r.t).abs() < 1e-12);
        assert!((neg.p - r.p).abs() < 1e-15);
    }

    #[test]
    fn paired_ttest_degenerate_rules() {
        let a = [0.7, 0.8, 0.9];
        let r = paired_ttest(&a, &a).unwrap();
        assert_eq!(
            (r.t, r.p, r.degenerate),
            (0.0, 1.0, Some(Degenerate::Identical))
        );
        let b = [0.5, 0.5, 0.5];
        let c = [0.25, 0.25, 0.25];
        let r = paired_ttest(&b, &c).unwrap();
        assert_eq!((r.p, r.degenerate), (0.0, Some(Degenerate::ConstantShift)));
        assert!(paired_ttest(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn cv_zero_model_scores_majority() {
        let s = synth_generate(100, 2, 0.2).unwrap();
        let cfg = SolverConfig {
            lambda: 1e6,
            ..SolverConfig::default()
        };
        let r = cross_validate(&s.dataset, &s.partition, &cfg, GammaMode::Median, 5, 1).unwrap();
        for (f, m) in r.per_fold.iter().enumerate() {
            let labels: Vec<Label> = (0..100)
                .filter(|&i| r.fold_assignments[i] == f)
                .map(|i| s.dataset.labels()[i])
                .collect();
            let neg = labels.iter().filter(|&&y| y == -1).count() as f64;
            assert_eq!(m.auroc, 0.5);
            assert_eq!(m.accuracy, 100.0 * neg / labels.len() as f64);
            assert_eq!(m.f1, 0.0);
        }
    }

    #[test]
    fn cv_holds_out_every_sample_once() {
        let s = synth_generate(120, 3, 0.2).unwrap();
        let cfg = SolverConfig {
            lambda: 1e-2,
            ..SolverConfig::default()
        };
        let r = cross_validate(&s.dataset, &s.partition, &cfg, GammaMode::Median, 4, 9).unwrap();
        assert_eq!(r.fold_assignments.len(), 120);
        assert_eq!(r.per_fold.len(), 4);
        assert_eq!(r.per_fold_group_importance.len(), 4);
        assert!(r.mean.auroc > 0.7, "{:?}", r.mean);
        let again =
            cross_validate(&s.dataset, &s.partition, &cfg, GammaMode::Median, 4, 9).unwrap();
        assert_eq!(r, again);
        // each held-out decision is reproduced by a model that never saw that row
        let f = r.fold_assignments[0];
        let train: Vec<usize> = (0..120).filter(|&i| r.fold_assignments[i] != f).collect();
        let model = PreparedFit::new(&s.dataset.select_rows(&train), &s.partition, None)
            .unwrap()
            .fit(&cfg, None)
            .unwrap();
        let d = decision_function(&model, &s.dataset.features().select_rows(&[0])).unwrap();
        assert_eq!(d[0], r.decisions[0]);
    }

    #[test]
    fn cv_duplicated_samples_stable() {
        let s = synth_generate(200, 4, 0.2).unwrap();
        let cfg = SolverConfig {
            lambda: 1e-2,
            ..SolverConfig::default()
        };
        let once = cross_validate(&s.dataset, &s.partition, &cfg, GammaMode::Median, 5, 2).unwrap();
        let rows: Vec<usize> = (0..200).chain(0..200).collect();
        let doubled = s.dataset.select_rows(&rows);
        let ids: Vec<String> = (0..400).map(|i| format!("d{i}")).collect();
        let doubled = Dataset::from_parts(
            doubled.samples().clone(),
            doubled.labels().to_vec(),
            doubled.feature_names().to_vec(),
            ids,
        )
        .unwrap();
        // copies share their original's fold, so no held-out row has a twin in training
        let folds: Vec<usize> = rows.iter().map(|&i| once.fold_assignments[i]).collect();
        let twice =
            cross_validate_with_folds(&doubled, &s.partition, &cfg, GammaMode::Median, &folds)
                .unwrap();
        assert!(
            (once.mean.auroc - twice.mean.auroc).abs() < 0.02,
            "{} vs {}",
            once.mean.auroc,
            twice.mean.auroc
        );
    }

    #[test]
    fn grid_tie_breaks() {
        let s = synth_generate(80, 5, 0.2).unwrap();
        let base = SolverConfig::default();
        let single = grid_search(
            &s.dataset,
            &s.partition,
            &[0.01],
            &[1.0],
            &[GammaMode::Median],
            &base,
            5,
            1,
        )
        .unwrap();
        assert_eq!(single.points.len(), 1);
        assert_eq!(single.best, single.points[0]);

        let huge = grid_search(
            &s.dataset,
            &s.partition,
            &[1e5, 1e6, 1e4],
            &[0.5, 1.0],
            &[GammaMode::Median],
            &base,
            5,
            1,
        )
        .unwrap();
        assert!(huge.points.iter().all(|p| p.mean_auroc == 0.5));
        assert_eq!((huge.best.lambda, huge.best.sigma), (1e6, 1.0));
    }

    #[test]
    fn grid_prefers_fitted_models_on_signal() {
        let s = synth_generate(150, 6, 0.2).unwrap();
        let base = SolverConfig::default();
        let lambdas = default_lambda_grid(
            &s.dataset,
            &s.partition,
            &[1.0],
            &[GammaMode::Median],
            &base,
        )
        .unwrap();
        assert_eq!(lambdas.len(), DEFAULT_LAMBDA_COUNT);
        let r = grid_search(
            &s.dataset,
            &s.partition,
            &lambdas,
            &[1.0],
            &[GammaMode::Median],
            &base,
            5,
            3,
        )
        .unwrap();
        assert!(r.best.lambda < lambdas[0]);
        assert!(r.best.mean_auroc > 0.8);
    }
}

//! Groupwise majorization descent for the group-sparse kernel objective
//!
//! ```text
//! min_alpha (1/n) sum_i c(y_i) l(y_i (sum_j K_j alpha_j)_i + y_i b) + lambda sum_j w_j |alpha_j|_2
//! ```
//!
//! Each sweep visits groups in fixed order. The smooth part restricted to
//! group `j` is majorized by a quadratic with curvature `gamma_j` (curvature
//! bound of the loss times the largest class weight times
//! `lambda_max(K_j^T K_j) / n`, inflated by 1%), whose minimizer plus the
//! group penalty has a closed-form block soft-threshold.
//!
//! The intercept `b` is off by default; when enabled it is refit by exact
//! one-dimensional minimization after every sweep.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::coherence::{ClassWeights, CoherenceParams};
use crate::dataio::{GroupPartition, Label};
use crate::error::{Error, Result};
use crate::kernels::GramBlocks;

const REFRESH_EVERY: usize = 32;

pub const MAJORIZATION_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// `None` means inverse-frequency weights computed from the labels.
    pub class_weights: Option<ClassWeights>,
    pub fit_intercept: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            sigma: 1.0,
            max_iters: 1000,
            tol: 1e-6,
            class_weights: None,
            fit_intercept: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        CoherenceParams::new(self.sigma)?;
        if let Some(w) = &self.class_weights {
            w.validate()?;
        }
        Ok(())
    }

    pub fn resolved_class_weights(&self, labels: &[Label]) -> Result<ClassWeights> {
        match self.class_weights {
            Some(w) => Ok(w),
            None => ClassWeights::balanced(labels),
        }
    }
}

/// Coefficients `alpha`, one row per group, plus the (optional) intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefBlocks {
    alpha: Array2<f64>,
    intercept: f64,
}

impl CoefBlocks {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self {
            alpha: Array2::zeros((d, n)),
            intercept: 0.0,
        }
    }

    pub fn new(alpha: Array2<f64>, intercept: f64) -> Result<Self> {
        if alpha.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::InvalidParameter(
                "coefficients must be finite".into(),
            ));
        }
        Ok(Self { alpha, intercept })
    }

    pub fn alpha(&self) -> &Array2<f64> {
        &self.alpha
    }

    pub fn block(&self, j: usize) -> ArrayView1<'_, f64> {
        self.alpha.row(j)
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn n_groups(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn group_norm(&self, j: usize) -> f64 {
        self.alpha.row(j).dot(&self.alpha.row(j)).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().all(|&v| v == 0.0)
    }

    /// Groups with at least one nonzero coefficient.
    pub fn active_groups(&self) -> Vec<usize> {
        (0..self.n_groups())
            .filter(|&j| self.alpha.row(j).iter().any(|&v| v != 0.0))
            .collect()
    }

    pub(crate) fn set_block(&mut self, j: usize, values: &[f64]) {
        self.alpha.row_mut(j).assign(&ArrayView1::from(values));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Objective before the first sweep, then after each sweep.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub active_groups: Vec<usize>,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the initial objective")
    }
}

/// Validated view of one problem instance.
struct Problem<'a> {
    gram: &'a GramBlocks,
    labels: Vec<f64>,
    sample_weights: Vec<f64>,
    weights: ClassWeights,
    loss: CoherenceParams,
    partition: &'a GroupPartition,
    cfg: &'a SolverConfig,
}

impl<'a> Problem<'a> {
    fn new(
        gram: &'a GramBlocks,
        labels: &[Label],
        partition: &'a GroupPartition,
        cfg: &'a SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = gram.n_samples();
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n}x{n} Gram blocks",
                labels.len()
            )));
        }
        if n == 0 {
            return Err(Error::InsufficientData("no training samples".into()));
        }
        if gram.n_groups() != partition.n_groups() {
            return Err(Error::DimensionMismatch(format!(
                "{} Gram blocks for {} groups",
                gram.n_groups(),
                partition.n_groups()
            )));
        }
        let weights = cfg.resolved_class_weights(labels)?;
        Ok(Self {
            gram,
            labels: labels.iter().map(|&y| f64::from(y)).collect(),
            sample_weights: labels.iter().map(|&y| weights.weight(y)).collect(),
            weights,
            loss: CoherenceParams::new(cfg.sigma)?,
            partition,
            cfg,
        })
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    fn d(&self) -> usize {
        self.gram.n_groups()
    }

    fn check_coefs(&self, alpha: &CoefBlocks) -> Result<()> {
        if alpha.alpha.dim() != (self.d(), self.n()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficients are {:?}, expected {:?}",
                alpha.alpha.dim(),
                (self.d(), self.n())
            )));
        }
        Ok(())
    }

    fn check_group(&self, j: usize) -> Result<()> {
        if j >= self.d() {
            return Err(Error::InvalidParameter(format!(
                "group index {j} out of range for {} groups",
                self.d()
            )));
        }
        Ok(())
    }

    /// `f = sum_j K_j alpha_j` (without intercept).
    fn fitted(&self, alpha: &CoefBlocks) -> Array1<f64> {
        let mut f = Array1::zeros(self.n());
        for (j, block) in self.gram.blocks().iter().enumerate() {
            let a = alpha.alpha.row(j);
            if a.iter().any(|&v| v != 0.0) {
                f += &block.dot(&a);
            }
        }
        f
    }

    fn smooth(&self, f: &Array1<f64>, intercept: f64) -> f64 {
        let total: f64 = f
            .iter()
            .zip(&self.labels)
            .zip(&self.sample_weights)
            .map(|((&fi, &y), &c)| c * self.loss.value(y * (fi + intercept)))
            .sum();
        total / self.n() as f64
    }

    fn penalty(&self, alpha: &CoefBlocks) -> f64 {
        self.partition
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * alpha.group_norm(j))
            .sum::<f64>()
            * self.cfg.lambda
    }

    /// `v_i = c_i y_i l'(m_i) / n`; the group gradient is `K_j v`.
    fn score_vector(&self, f: &Array1<f64>, intercept: f64) -> Array1<f64> {
        let n = self.n() as f64;
        Array1::from_iter(
            f.iter()
                .zip(&self.labels)
                .zip(&self.sample_weights)
                .map(|((&fi, &y), &c)| c * y * self.loss.derivative(y * (fi + intercept)) / n),
        )
    }

    fn majorization(&self, j: usize) -> Result<f64> {
        let spectral = self.gram.spectral_norms()?[j];
        Ok(MAJORIZATION_SAFETY
            * self.loss.curvature_bound()
            * self.weights.max()
            * spectral
            * spectral
            / self.n() as f64)
    }

    /// Exact minimizer of the smooth part over the intercept with `f` fixed.
    fn refit_intercept(&self, f: &Array1<f64>, start: f64) -> f64 {
        let n = self.n() as f64;
        let lipschitz = self.loss.curvature_bound() * self.weights.max();
        let mut b = start;
        let mut value = self.smooth(f, b);
        for _ in 0..200 {
            let (mut g, mut h) = (0.0, 0.0);
            for ((&fi, &y), &c) in f.iter().zip(&self.labels).zip(&self.sample_weights) {
                let m = y * (fi + b);
                g += c * y * self.loss.derivative(m);
                h += c * self.loss.second_derivative(m);
            }
            g /= n;
            h /= n;
            if g.abs() < 1e-13 {
                break;
            }
            let newton = if h > 1e-12 { b - g / h } else { f64::NAN };
            let candidate = if newton.is_finite() && self.smooth(f, newton) <= value {
                newton
            } else {
                // Majorized step; never increases the objective.
                b - g / lipschitz
            };
            let cand_value = self.smooth(f, candidate);
            if cand_value > value {
                break;
            }
            let moved = (candidate - b).abs();
            b = candidate;
            value = cand_value;
            if moved <= 1e-15 * b.abs().max(1.0) {
                break;
            }
        }
        b
    }
}

/// Smooth risk plus group penalty at `alpha`.
pub fn objective(
    alpha: &CoefBlocks,
    gram: &GramBlocks,
    labels: &[Label],
    partition: &GroupPartition,
    cfg: &SolverConfig,
) -> Result<f64> {
    let problem = Problem::new(gram, labels, partition, cfg)?;
    problem.check_coefs(alpha)?;
    let f = problem.fitted(alpha);
    Ok(problem.smooth(&f, alpha.intercept) + problem.penalty(alpha))
}

/// Gradient of the smooth part with respect to group `j`'s coefficients.
pub fn group_gradient(
    alpha: &CoefBlocks,
    gram: &GramBlocks,
    labels: &[Label],
    partition: &GroupPartition,
    cfg: &SolverConfig,
    j: usize,
) -> Result<Vec<f64>> {
    let problem = Problem::new(gram, labels, partition, cfg)?;
    problem.check_coefs(alpha)?;
    problem.check_group(j)?;
    let f = problem.fitted(alpha);
    let v = problem.score_vector(&f, alpha.intercept);
    Ok(gram.block(j).dot(&v).to_vec())
}

/// Quadratic-majorization curvature for group `j`.
pub fn majorization_constant(
    gram: &GramBlocks,
    labels: &[Label],
    cfg: &SolverConfig,
    j: usize,
) -> Result<f64> {
    let partition = GroupPartition::singletons(
        &(0..gram.n_groups())
            .map(|g| g.to_string())
            .collect::<Vec<_>>(),
    );
    let problem = Problem::new(gram, labels, &partition, cfg)?;
    problem.check_group(j)?;
    problem.majorization(j)
}

/// Proximal step of the majorized group subproblem: block soft-threshold of
/// `gamma_j alpha_j - grad_j` at `lambda w_j`, divided by `gamma_j`.
pub fn group_update(
    alpha_j: &[f64],
    grad_j: &[f64],
    gamma_j: f64,
    lambda: f64,
    w_j: f64,
) -> Vec<f64> {
    debug_assert!(gamma_j > 0.0);
    debug_assert_eq!(alpha_j.len(), grad_j.len());
    let u: Vec<f64> = alpha_j
        .iter()
        .zip(grad_j)
        .map(|(a, g)| gamma_j * a - g)
        .collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = lambda * w_j;
    if norm <= threshold {
        return vec![0.0; u.len()];
    }
    let scale = (1.0 - threshold / norm) / gamma_j;
    u.into_iter().map(|v| v * scale).collect()
}

/// Smallest `lambda` at which `alpha = 0` is optimal:
/// `max_j |grad_j(0)|_2 / w_j` (gradient taken at the optimal intercept when
/// one is fitted).
pub fn lambda_max(
    gram: &GramBlocks,
    labels: &[Label],
    partition: &GroupPartition,
    cfg: &SolverConfig,
) -> Result<f64> {
    let problem = Problem::new(gram, labels, partition, cfg)?;
    let f = Array1::zeros(problem.n());
    let b = if cfg.fit_intercept {
        problem.refit_intercept(&f, 0.0)
    } else {
        0.0
    };
    let v = problem.score_vector(&f, b);
    Ok(gram
        .blocks()
        .iter()
        .zip(partition.weights())
        .map(|(k, w)| {
            let g = k.dot(&v);
            g.dot(&g).sqrt() / w
        })
        .fold(0.0, f64::max))
}

/// Per-group optimality residuals: `max(0, |grad_j| - lambda w_j)` for zero
/// groups, `|grad_j + lambda w_j alpha_j / |alpha_j||` for active ones.
pub fn kkt_residuals(
    alpha: &CoefBlocks,
    gram: &GramBlocks,
    labels: &[Label],
    partition: &GroupPartition,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let problem = Problem::new(gram, labels, partition, cfg)?;
    problem.check_coefs(alpha)?;
    let f = problem.fitted(alpha);
    let v = problem.score_vector(&f, alpha.intercept);
    Ok((0..problem.d())
        .map(|j| {
            let g = gram.block(j).dot(&v);
            let t = cfg.lambda * partition.weights()[j];
            let norm = alpha.group_norm(j);
            if norm == 0.0 {
                (g.dot(&g).sqrt() - t).max(0.0)
            } else {
                let r = &g + &(&alpha.alpha.row(j) * (t / norm));
                r.dot(&r).sqrt()
            }
        })
        .collect())
}

/// Cyclic groupwise majorization descent from `init` (or zero).
///
/// Stops once a full sweep lowers the objective by less than `tol` relative
/// to its previous value, or after `max_iters` sweeps.
pub fn solve(
    gram: &GramBlocks,
    labels: &[Label],
    partition: &GroupPartition,
    cfg: &SolverConfig,
    init: Option<&CoefBlocks>,
) -> Result<(CoefBlocks, SolveReport)> {
    let problem = Problem::new(gram, labels, partition, cfg)?;
    let (d, n) = (problem.d(), problem.n());
    let mut coefs = match init {
        Some(c) => {
            problem.check_coefs(c)?;
            let mut c = c.clone();
            if !cfg.fit_intercept {
                c.intercept = 0.0;
            }
            c
        }
        None => CoefBlocks::zeros(d, n),
    };
    let curvatures = (0..d)
        .map(|j| problem.majorization(j))
        .collect::<Result<Vec<_>>>()?;
    let weights = partition.weights();

    let mut f = problem.fitted(&coefs);
    if cfg.fit_intercept {
        coefs.intercept = problem.refit_intercept(&f, coefs.intercept);
    }
    let mut current = problem.smooth(&f, coefs.intercept) + problem.penalty(&coefs);
    if !current.is_finite() {
        return Err(Error::NonFiniteObjective { sweep: 0 });
    }
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        for j in 0..d {
            let k = gram.block(j);
            let v = problem.score_vector(&f, coefs.intercept);
            let grad = k.dot(&v);
            let old = coefs.alpha.row(j).to_vec();
            let new = group_update(
                &old,
                grad.as_slice().expect("contiguous"),
                curvatures[j],
                cfg.lambda,
                weights[j],
            );
            if new != old {
                let delta = Array1::from_iter(new.iter().zip(&old).map(|(a, b)| a - b));
                f += &k.dot(&delta);
                coefs.set_block(j, &new);
            }
        }
        // Periodic fresh evaluation keeps rounding drift out of the fitted values.
        if iterations % REFRESH_EVERY == 0 {
            f = problem.fitted(&coefs);
        }
        if cfg.fit_intercept {
            coefs.intercept = problem.refit_intercept(&f, coefs.intercept);
        }
        let next = problem.smooth(&f, coefs.intercept) + problem.penalty(&coefs);
        if !next.is_finite() {
            return Err(Error::NonFiniteObjective { sweep: iterations });
        }
        trace.push(next);
        let decrease = (current - next) / current.abs().max(f64::MIN_POSITIVE);
        current = next;
        if decrease < cfg.tol {
            converged = true;
            break;
        }
    }

    let report = SolveReport {
        iterations,
        objective_trace: trace,
        converged,
        active_groups: coefs.active_groups(),
    };
    Ok((coefs, report))
}

/// Margins `y_i (f_i + b)` of a coefficient set on its training Gram blocks.
pub fn training_margins(
    alpha: &CoefBlocks,
    gram: &GramBlocks,
    labels: &[Label],
) -> Result<Vec<f64>> {
    if alpha.alpha.dim() != (gram.n_groups(), gram.n_samples()) || labels.len() != gram.n_samples()
    {
        return Err(Error::DimensionMismatch(
            "coefficients, Gram blocks and labels disagree".into(),
        ));
    }
    let mut f = Array1::<f64>::zeros(gram.n_samples());
    for (j, k) in gram.blocks().iter().enumerate() {
        f += &k.dot(&alpha.alpha.row(j));
    }
    Ok(f.iter()
        .zip(labels)
        .map(|(fi, &y)| f64::from(y) * (fi + alpha.intercept))
        .collect())
}

//! Per-group Gaussian kernels and Gram blocks.

use std::sync::OnceLock;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{FeatureTable, GroupPartition};
use crate::error::{Error, Result};

/// Gaussian bandwidth `gamma_j` for every group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    gammas: Vec<f64>,
}

impl KernelSpec {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "kernel gamma must be positive and finite, got {g}"
            )));
        }
        Ok(Self { gammas })
    }

    /// The same gamma for all `d` groups.
    pub fn shared(gamma: f64, d: usize) -> Result<Self> {
        Self::new(vec![gamma; d])
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn n_groups(&self) -> usize {
        self.gammas.len()
    }
}

/// How a fit chooses its kernel bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Per-group median heuristic on the (standardized) training data.
    Median,
    /// One gamma for every group.
    Shared(f64),
}

impl GammaMode {
    pub fn resolve(
        &self,
        train: ArrayView2<'_, f64>,
        partition: &GroupPartition,
    ) -> Result<KernelSpec> {
        match *self {
            GammaMode::Median => median_gamma_matrix(train, partition),
            GammaMode::Shared(g) => KernelSpec::shared(g, partition.n_groups()),
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-gamma * |a - b|^2)`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel arguments have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite kernel argument".into()));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel gamma must be positive, got {gamma}"
        )));
    }
    Ok((-gamma * sq_dist(a, b)).exp())
}

/// The `d` symmetric `n x n` kernel matrices of a training set.
#[derive(Debug, Clone)]
pub struct GramBlocks {
    blocks: Vec<Array2<f64>>,
    spectral: OnceLock<Vec<f64>>,
}

impl PartialEq for GramBlocks {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
    }
}

impl GramBlocks {
    pub fn from_blocks(blocks: Vec<Array2<f64>>) -> Result<Self> {
        let n = blocks.first().map_or(0, |b| b.nrows());
        if blocks.iter().any(|b| b.dim() != (n, n)) {
            return Err(Error::DimensionMismatch(
                "Gram blocks must all be square with equal size".into(),
            ));
        }
        Ok(Self {
            blocks,
            spectral: OnceLock::new(),
        })
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> &Array2<f64> {
        &self.blocks[j]
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_samples(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    /// Largest eigenvalue of each block, by power iteration. Cached.
    pub fn spectral_norms(&self) -> Result<&[f64]> {
        if let Some(v) = self.spectral.get() {
            return Ok(v);
        }
        let norms = self
            .blocks
            .iter()
            .enumerate()
            .map(|(j, b)| power_iteration(b, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.spectral.get_or_init(|| norms))
    }
}

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 500;

/// Dominant eigenvalue of a symmetric PSD matrix. Starts from the all-ones
/// vector, which is never orthogonal to the Perron vector of a positive matrix.
pub(crate) fn power_iteration(k: &Array2<f64>, group: usize) -> Result<f64> {
    let n = k.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = ndarray::Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = k.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if (norm - estimate).abs() <= POWER_TOL * norm {
            return Ok(norm);
        }
        estimate = norm;
        v = w / norm;
    }
    Err(Error::PowerIteration {
        group,
        iterations: POWER_MAX_ITERS,
    })
}

fn group_submatrix(x: ArrayView2<'_, f64>, cols: &[usize]) -> Array2<f64> {
    x.select(Axis(1), cols).as_standard_layout().into_owned()
}

fn check_spec(partition: &GroupPartition, spec: &KernelSpec) -> Result<()> {
    if spec.n_groups() != partition.n_groups() {
        return Err(Error::DimensionMismatch(format!(
            "{} kernel gammas for {} groups",
            spec.n_groups(),
            partition.n_groups()
        )));
    }
    Ok(())
}

/// Kernel blocks between the rows of `left` and the rows of `right`
/// (`n_left x n_right` per group).
pub fn cross_gram_matrix(
    left: ArrayView2<'_, f64>,
    right: ArrayView2<'_, f64>,
    partition: &GroupPartition,
    spec: &KernelSpec,
) -> Result<Vec<Array2<f64>>> {
    check_spec(partition, spec)?;
    if left.ncols() != right.ncols() || left.ncols() != partition.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "kernel inputs have {} and {} columns, partition covers {}",
            left.ncols(),
            right.ncols(),
            partition.n_features()
        )));
    }
    Ok(partition
        .groups()
        .par_iter()
        .zip(spec.gammas())
        .map(|(cols, &gamma)| {
            let a = group_submatrix(left, cols);
            let b = group_submatrix(right, cols);
            let mut out = Array2::zeros((a.nrows(), b.nrows()));
            for (i, ra) in a.outer_iter().enumerate() {
                let ra = ra.as_slice().expect("contiguous row");
                for (q, rb) in b.outer_iter().enumerate() {
                    out[[i, q]] =
                        (-gamma * sq_dist(ra, rb.as_slice().expect("contiguous row"))).exp();
                }
            }
            out
        })
        .collect())
}

pub fn gram_matrix(
    train: ArrayView2<'_, f64>,
    partition: &GroupPartition,
    spec: &KernelSpec,
) -> Result<GramBlocks> {
    GramBlocks::from_blocks(cross_gram_matrix(train, train, partition, spec)?)
}

pub fn gram_blocks(
    train: &FeatureTable,
    partition: &GroupPartition,
    spec: &KernelSpec,
) -> Result<GramBlocks> {
    gram_matrix(train.samples().view(), partition, spec)
}

/// Kernel values between training rows and query rows; columns must agree
/// by name and order.
pub fn cross_gram(
    train: &FeatureTable,
    query: &FeatureTable,
    partition: &GroupPartition,
    spec: &KernelSpec,
) -> Result<Vec<Array2<f64>>> {
    if train.feature_names() != query.feature_names() {
        return Err(Error::DimensionMismatch(
            "query columns do not match training columns".into(),
        ));
    }
    cross_gram_matrix(
        train.samples().view(),
        query.samples().view(),
        partition,
        spec,
    )
}

/// `gamma_j = 1 / median` of the nonzero squared pairwise distances within
/// group `j`.
pub fn median_heuristic_gamma(
    train: &FeatureTable,
    partition: &GroupPartition,
) -> Result<KernelSpec> {
    median_gamma_matrix(train.samples().view(), partition)
}

pub(crate) fn median_gamma_matrix(
    train: ArrayView2<'_, f64>,
    partition: &GroupPartition,
) -> Result<KernelSpec> {
    let n = train.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "median heuristic needs at least 2 samples, got {n}"
        )));
    }
    let gammas = partition
        .groups()
        .iter()
        .enumerate()
        .map(|(j, cols)| {
            let sub = group_submatrix(train, cols);
            let mut dists = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                let ri = sub.row(i);
                let ri = ri.as_slice().expect("contiguous row");
                for k in (i + 1)..n {
                    let d = sq_dist(ri, sub.row(k).as_slice().expect("contiguous row"));
                    if d > 0.0 {
                        dists.push(d);
                    }
                }
            }
            if dists.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "all pairwise distances are zero in group {:?}",
                    partition.names()[j]
                )));
            }
            dists.sort_unstable_by(f64::total_cmp);
            let m = dists.len();
            let median = if m % 2 == 1 {
                dists[m / 2]
            } else {
                0.5 * (dists[m / 2 - 1] + dists[m / 2])
            };
            Ok(1.0 / median)
        })
        .collect::<Result<Vec<_>>>()?;
    KernelSpec::new(gammas)
}

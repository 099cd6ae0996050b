//! Calibration map estimation with conditional kernel mean embeddings.
//!
//! Given calibration pairs `(q_i, y_i)` of predictions and observed targets,
//! the embedding of the recalibrated prediction for a query `Q` is
//! `sum_i beta_i(Q) psi(y_i)` with
//!
//! ```text
//! beta(Q) = (K + ridge * I)^-1 (k(Q, q_1), ..., k(Q, q_n))
//! ```
//!
//! and `K` the EDK Gram matrix of the calibration predictions. The explicit
//! recalibrated distribution is `sum_i w_i delta(y_i)` where `w` is the
//! Euclidean projection of `beta` onto the probability simplex.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use rand::Rng;

use crate::empirical::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::kernels::{edk_unchecked, gram_matrix, KernelConfig};
use crate::sum::CompensatedSum;

/// Fitted recalibrator.
#[derive(Debug)]
pub struct CalibrationMap {
    cal_targets: Vec<f64>,
    cal_dists: Vec<EmpiricalDistribution>,
    /// Cholesky factor of `K + ridge * I`.
    factor: Llt<f64>,
    /// Resolved (explicit) kernel configuration.
    config: KernelConfig,
    /// Calibration indices ordered by target value.
    target_order: Vec<usize>,
}

impl CalibrationMap {
    /// Fits the map. Median-heuristic bandwidths are resolved here from the
    /// calibration set using `rng`.
    pub fn fit<R: Rng + ?Sized>(
        cal_dists: Vec<EmpiricalDistribution>,
        cal_targets: Vec<f64>,
        config: &KernelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let n = cal_dists.len();
        if n != cal_targets.len() {
            return Err(Error::LengthMismatch(n, cal_targets.len()));
        }
        if n < 2 {
            return Err(Error::param("cal_dists", "need at least two calibration points"));
        }
        if let Some((index, &value)) = cal_targets.iter().enumerate().find(|(_, y)| !y.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let config = config.resolve(&cal_dists, &cal_targets, rng)?;

        let mut gram = gram_matrix(&cal_dists, config.edk_bandwidth_sq)?;
        for i in 0..n {
            gram[(i, i)] += config.ridge;
        }
        let factor = gram
            .llt(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Cholesky factorization failed: {e:?}")))?;

        let mut target_order: Vec<usize> = (0..n).collect();
        target_order.sort_by(|&a, &b| cal_targets[a].total_cmp(&cal_targets[b]));

        Ok(Self {
            cal_targets,
            cal_dists,
            factor,
            config,
            target_order,
        })
    }

    pub fn len(&self) -> usize {
        self.cal_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cal_targets.is_empty()
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn cal_targets(&self) -> &[f64] {
        &self.cal_targets
    }

    pub fn cal_dists(&self) -> &[EmpiricalDistribution] {
        &self.cal_dists
    }

    /// `(k(Q, q_1), ..., k(Q, q_n))`.
    pub fn cross_kernel(&self, query: &EmpiricalDistribution) -> Vec<f64> {
        let s = self.config.edk_bandwidth_sq;
        self.cal_dists.iter().map(|q| edk_unchecked(query, q, s)).collect()
    }

    /// Unconstrained CKME weights `beta(Q)`; may be negative.
    pub fn raw_weights(&self, query: &EmpiricalDistribution) -> Vec<f64> {
        let k = self.cross_kernel(query);
        let rhs = Mat::from_fn(k.len(), 1, |i, _| k[i]);
        let beta = self.factor.solve(&rhs);
        (0..k.len()).map(|i| beta[(i, 0)]).collect()
    }

    /// Raw weights for many queries at once; column `j` belongs to
    /// `queries[j]`.
    pub fn raw_weights_batch(&self, queries: &[EmpiricalDistribution]) -> Mat<f64> {
        let s = self.config.edk_bandwidth_sq;
        let rhs = Mat::from_fn(self.len(), queries.len(), |i, j| {
            edk_unchecked(&queries[j], &self.cal_dists[i], s)
        });
        self.factor.solve(&rhs)
    }

    /// Recalibrated distribution for one query.
    pub fn recalibrate(&self, query: &EmpiricalDistribution) -> Result<EmpiricalDistribution> {
        let beta = self.raw_weights(query);
        self.preimage(&beta)
    }

    /// Recalibrated distributions for many queries.
    pub fn recalibrate_batch(&self, queries: &[EmpiricalDistribution]) -> Result<Vec<EmpiricalDistribution>> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let beta = self.raw_weights_batch(queries);
        let n = self.len();
        let mut column = vec![0.0; n];
        (0..queries.len())
            .map(|j| {
                for (i, c) in column.iter_mut().enumerate() {
                    *c = beta[(i, j)];
                }
                self.preimage(&column)
            })
            .collect()
    }

    /// Projects `beta` onto the simplex and places the weights on the
    /// calibration targets. Atoms with exactly zero weight are dropped.
    fn preimage(&self, beta: &[f64]) -> Result<EmpiricalDistribution> {
        let w = project_simplex(beta)?;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for &i in &self.target_order {
            if w[i] > 0.0 {
                values.push(self.cal_targets[i]);
                weights.push(w[i]);
            }
        }
        Ok(EmpiricalDistribution::from_sorted_normalized(values, weights))
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding, `O(n log n)`.
///
/// Inputs already on the simplex (nonnegative, summing to one within
/// `1e-12`) are returned unchanged.
pub fn project_simplex(beta: &[f64]) -> Result<Vec<f64>> {
    if beta.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = beta.iter().enumerate().find(|(_, b)| !b.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let total = crate::sum::sum(beta.iter().copied());
    if beta.iter().all(|&b| b >= 0.0) && (total - 1.0).abs() <= 1e-12 {
        return Ok(beta.to_vec());
    }

    let mut sorted = beta.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = CompensatedSum::new();
    let mut rho = 0;
    let mut rho_sum = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        acc.add(u);
        let s = acc.value();
        if u + (1.0 - s) / (i + 1) as f64 > 0.0 {
            rho = i + 1;
            rho_sum = s;
        }
    }
    // rho >= 1 always: for i = 0 the test reads 1 > 0.
    let tau = (1.0 - rho_sum) / rho as f64;
    let mut w: Vec<f64> = beta.iter().map(|&b| (b + tau).max(0.0)).collect();

    // Rescale away round-off so the output sums to one.
    let s = crate::sum::sum(w.iter().copied());
    if s > 0.0 && s != 1.0 {
        for x in &mut w {
            *x /= s;
        }
    }
    Ok(w)
}

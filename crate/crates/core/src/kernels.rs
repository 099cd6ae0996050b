//! Kernels on the real line and on distributions.
//!
//! The distribution kernel is the Energy Distance Kernel (EDK),
//! `k(p, q) = exp(-s * MMD²(p, q))`, where the MMD is taken in the RKHS of
//! the Brownian covariance kernel `r(u, v) = |u| + |v| - |u - v|`. For that
//! base kernel the squared MMD equals twice the energy distance, so each
//! evaluation is a single sorted merge.

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::{energy_distance, EmpiricalDistribution};
use crate::error::{Error, Result};

/// Default cap on the number of pairs the median heuristic looks at.
pub const DEFAULT_MAX_PAIRS: usize = 10_000;

/// Default ridge when none is given.
pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    Explicit,
    MedianHeuristic,
}

/// Bandwidths and regularization for the distribution kernel, the target
/// kernel and the ridge solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Scale `s` in `exp(-s * MMD²)`; units of 1/target².
    pub edk_bandwidth_sq: f64,
    /// Length scale of the Laplace kernel on targets.
    pub target_bandwidth: f64,
    /// Ridge added to the Gram diagonal.
    pub ridge: f64,
    pub bandwidth_mode: BandwidthMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            edk_bandwidth_sq: 1.0,
            target_bandwidth: 1.0,
            ridge: DEFAULT_RIDGE,
            bandwidth_mode: BandwidthMode::MedianHeuristic,
        }
    }
}

impl KernelConfig {
    pub fn explicit(edk_bandwidth_sq: f64, target_bandwidth: f64, ridge: f64) -> Result<Self> {
        let config = Self {
            edk_bandwidth_sq,
            target_bandwidth,
            ridge,
            bandwidth_mode: BandwidthMode::Explicit,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn median_heuristic(ridge: f64) -> Result<Self> {
        let config = Self {
            ridge,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        positive("edk_bandwidth_sq", self.edk_bandwidth_sq)?;
        positive("target_bandwidth", self.target_bandwidth)?;
        positive("ridge", self.ridge)
    }

    /// Resolves median-heuristic bandwidths from data; explicit configs are
    /// returned unchanged. The result always has `Explicit` mode.
    pub fn resolve<R: Rng + ?Sized>(
        &self,
        dists: &[EmpiricalDistribution],
        targets: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        self.validate()?;
        match self.bandwidth_mode {
            BandwidthMode::Explicit => Ok(*self),
            BandwidthMode::MedianHeuristic => {
                let (edk_bandwidth_sq, target_bandwidth) =
                    median_heuristic_bandwidths(dists, targets, DEFAULT_MAX_PAIRS, rng)?;
                Ok(Self {
                    edk_bandwidth_sq,
                    target_bandwidth,
                    ridge: self.ridge,
                    bandwidth_mode: BandwidthMode::Explicit,
                })
            }
        }
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {x}")))
    }
}

/// Laplace kernel `exp(-|u - v| / sigma)`.
pub fn laplace_kernel(u: f64, v: f64, sigma: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    Ok(laplace(u, v, sigma))
}

#[inline]
pub(crate) fn laplace(u: f64, v: f64, sigma: f64) -> f64 {
    (-(u - v).abs() / sigma).exp()
}

/// Brownian motion covariance kernel `|u| + |v| - |u - v|`.
pub fn brownian_kernel(u: f64, v: f64) -> f64 {
    u.abs() + v.abs() - (u - v).abs()
}

/// Squared MMD under the Brownian kernel; equal to twice the energy distance.
pub fn mmd_sq_brownian(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    2.0 * energy_distance(p, q)
}

/// Energy Distance Kernel `exp(-edk_bandwidth_sq * MMD²(p, q))`.
pub fn edk(p: &EmpiricalDistribution, q: &EmpiricalDistribution, edk_bandwidth_sq: f64) -> Result<f64> {
    positive("edk_bandwidth_sq", edk_bandwidth_sq)?;
    Ok(edk_unchecked(p, q, edk_bandwidth_sq))
}

#[inline]
pub(crate) fn edk_unchecked(p: &EmpiricalDistribution, q: &EmpiricalDistribution, s: f64) -> f64 {
    (-s * mmd_sq_brownian(p, q)).exp()
}

/// Median-heuristic bandwidths `(edk_bandwidth_sq, target_bandwidth)`.
///
/// `edk_bandwidth_sq` is the reciprocal of the median squared MMD over
/// distribution pairs; `target_bandwidth` is the median absolute gap over
/// target pairs. At most `max_pairs` pairs are drawn (without replacement)
/// from each set.
pub fn median_heuristic_bandwidths<R: Rng + ?Sized>(
    dists: &[EmpiricalDistribution],
    targets: &[f64],
    max_pairs: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if dists.len() < 2 {
        return Err(Error::param("dists", "need at least two distributions"));
    }
    if targets.len() < 2 {
        return Err(Error::param("targets", "need at least two targets"));
    }
    if max_pairs == 0 {
        return Err(Error::param("max_pairs", "must be at least one"));
    }

    Ok((
        median_heuristic_edk(dists, max_pairs, rng)?,
        median_heuristic_target(targets, max_pairs, rng)?,
    ))
}

/// `1 / median MMD²` over sampled distribution pairs.
pub fn median_heuristic_edk<R: Rng + ?Sized>(
    dists: &[EmpiricalDistribution],
    max_pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    if dists.len() < 2 {
        return Err(Error::param("dists", "need at least two distributions"));
    }
    let mmds: Vec<f64> = sample_pairs(dists.len(), max_pairs.max(1), rng)
        .into_iter()
        .map(|(i, j)| mmd_sq_brownian(&dists[i], &dists[j]))
        .collect();
    let m = median(mmds);
    if m.is_nan() || m <= 0.0 {
        return Err(Error::DegenerateData(
            "median squared MMD between predictions is zero".into(),
        ));
    }
    Ok(1.0 / m)
}

/// Median absolute gap over sampled target pairs.
pub fn median_heuristic_target<R: Rng + ?Sized>(targets: &[f64], max_pairs: usize, rng: &mut R) -> Result<f64> {
    if targets.len() < 2 {
        return Err(Error::param("targets", "need at least two targets"));
    }
    let gaps: Vec<f64> = sample_pairs(targets.len(), max_pairs.max(1), rng)
        .into_iter()
        .map(|(i, j)| (targets[i] - targets[j]).abs())
        .collect();
    let m = median(gaps);
    if m.is_nan() || m <= 0.0 {
        return Err(Error::DegenerateData("median gap between targets is zero".into()));
    }
    Ok(m)
}

/// All pairs `i < j` when there are at most `max_pairs` of them, otherwise a
/// uniform sample of `max_pairs` distinct pairs.
fn sample_pairs<R: Rng + ?Sized>(n: usize, max_pairs: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let total = n * (n - 1) / 2;
    if total <= max_pairs {
        let mut pairs = Vec::with_capacity(total);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        return pairs;
    }
    rand::seq::index::sample(rng, total, max_pairs)
        .into_iter()
        .map(|k| pair_from_index(n, k))
        .collect()
}

/// Inverse of the row-major enumeration of the strict upper triangle.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    let mut row = n - 1;
    while k >= row {
        k -= row;
        i += 1;
        row -= 1;
    }
    (i, i + 1 + k)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// EDK Gram matrix with unit diagonal; the upper triangle is evaluated and
/// mirrored.
pub fn gram_matrix(dists: &[EmpiricalDistribution], edk_bandwidth_sq: f64) -> Result<Mat<f64>> {
    positive("edk_bandwidth_sq", edk_bandwidth_sq)?;
    if dists.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = dists.len();
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = 1.0;
        for i in 0..j {
            let v = edk_unchecked(&dists[i], &dists[j], edk_bandwidth_sq);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::empirical::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::kernels::BandwidthMode;

/// Default number of quantile atoms used to represent a Gaussian prediction.
pub const DEFAULT_GRID_SIZE: usize = 256;

/// Predictive distribution as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Pred {
    Samples {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Gaussian {
        mu: f64,
        sigma: f64,
    },
}

/// One line of a prediction file: target, prediction and optional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub y: f64,
    pub pred: Pred,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

impl PredictionRecord {
    pub fn from_distribution(y: f64, dist: &EmpiricalDistribution, x: Option<Vec<f64>>) -> Self {
        Self {
            y,
            pred: Pred::Samples {
                values: dist.values().to_vec(),
                weights: Some(dist.weights().to_vec()),
            },
            x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.y.is_finite() {
            return Err(Error::NonFinite {
                index: 0,
                value: self.y,
            });
        }
        match &self.pred {
            Pred::Gaussian { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::param("mu", "must be finite"));
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
                }
            }
            Pred::Samples { values, weights } => {
                EmpiricalDistribution::new(values.clone(), weights.clone())?;
            }
        }
        Ok(())
    }
}

/// Converts a record's prediction into an empirical distribution.
///
/// Sample predictions pass through; a Gaussian becomes `grid_size` equally
/// weighted atoms at the quantiles `(i - 1/2) / grid_size`.
pub fn empiricalize(pred: &Pred, grid_size: usize) -> Result<EmpiricalDistribution> {
    match pred {
        Pred::Samples { values, weights } => EmpiricalDistribution::new(values.clone(), weights.clone()),
        Pred::Gaussian { mu, sigma } => {
            if !mu.is_finite() {
                return Err(Error::param("mu", "must be finite"));
            }
            if !(sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
            }
            if grid_size == 0 {
                return Err(Error::param("grid_size", "must be positive"));
            }
            let std = Normal::standard();
            let g = grid_size as f64;
            // Upper half computed once and mirrored, so the grid is exactly
            // symmetric about mu.
            let half: Vec<f64> = (grid_size / 2..grid_size)
                .map(|i| std.inverse_cdf((i as f64 + 0.5) / g))
                .collect();
            let mut z: Vec<f64> = half.iter().rev().map(|q| -q).collect();
            if grid_size % 2 == 1 {
                z.pop();
            }
            z.extend_from_slice(&half);
            if grid_size % 2 == 1 {
                // The middle quantile is exactly 0.
                z[grid_size / 2] = 0.0;
            }
            let values: Vec<f64> = z.into_iter().map(|q| mu + sigma * q).collect();
            EmpiricalDistribution::uniform(values)
        }
    }
}

/// Settings of an end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub lambda: f64,
    pub bandwidth_mode: BandwidthMode,
    pub alpha: f64,
    pub n_null: usize,
    pub gaussian_grid_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            lambda: crate::kernels::DEFAULT_RIDGE,
            bandwidth_mode: BandwidthMode::MedianHeuristic,
            alpha: 0.05,
            n_null: 200,
            gaussian_grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "must be in (0, 1)"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if self.n_null < crate::cal_tests::MIN_NULL_REPLICATES {
            return Err(Error::param("n_null", "must be at least 99"));
        }
        if self.gaussian_grid_size < 16 {
            return Err(Error::param("gaussian_grid_size", "must be at least 16"));
        }
        Ok(())
    }
}

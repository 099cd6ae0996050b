use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cal_tests::{ks_uniform_test, pit_values, skce_test, TestReport};
use crate::empirical::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::kernels::{median_heuristic_edk, median_heuristic_target, KernelConfig, DEFAULT_MAX_PAIRS, DEFAULT_RIDGE};

/// Settings for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub alpha: f64,
    pub n_null: usize,
    pub seed: u64,
    /// Cap on the number of points entering the SKCE test; larger sets are
    /// subsampled with the evaluation seed. `None` uses every point.
    pub skce_max_n: Option<usize>,
    /// Mean CRPS of a reference run on the same data.
    pub reference_crps: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_null: 200,
            seed: 0,
            skce_max_n: None,
            reference_crps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub mean_crps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_crps: Option<f64>,
    /// Number of points used by the SKCE test.
    pub skce_n: usize,
    /// Bandwidths used by the SKCE kernels.
    pub skce_kernel: KernelConfig,
    pub skce: TestReport,
    pub ks: TestReport,
}

/// Mean CRPS, SKCE auto-calibration test and PIT/KS test of a set of
/// predictions. SKCE bandwidths come from the median heuristic.
pub fn evaluate(preds: &[EmpiricalDistribution], targets: &[f64], config: &EvalConfig) -> Result<EvaluationReport> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch(preds.len(), targets.len()));
    }
    if preds.len() < 2 {
        return Err(Error::param("preds", "need at least two predictions"));
    }
    let n = preds.len();
    let scores = preds
        .iter()
        .zip(targets)
        .map(|(q, &y)| q.crps(y))
        .collect::<Result<Vec<f64>>>()?;
    let mean_crps = crate::sum::sum(scores.iter().copied()) / n as f64;
    let relative_crps = config.reference_crps.map(|r| mean_crps / r);

    let ks = ks_uniform_test(&pit_values(preds, targets)?, config.alpha)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (skce_preds, skce_targets): (Vec<EmpiricalDistribution>, Vec<f64>) = match config.skce_max_n {
        Some(m) if m < n => rand::seq::index::sample(&mut rng, n, m)
            .into_iter()
            .map(|i| (preds[i].clone(), targets[i]))
            .unzip(),
        _ => (preds.to_vec(), targets.to_vec()),
    };
    // When most prediction pairs coincide the EDK bandwidth has no effect on
    // those pairs; fall back to a unit scale instead of failing.
    let edk_bandwidth_sq = match median_heuristic_edk(&skce_preds, DEFAULT_MAX_PAIRS, &mut rng) {
        Ok(s) => s,
        Err(Error::DegenerateData(_)) => 1.0,
        Err(e) => return Err(e),
    };
    let target_bandwidth = median_heuristic_target(&skce_targets, DEFAULT_MAX_PAIRS, &mut rng)?;
    let skce_kernel = KernelConfig::explicit(edk_bandwidth_sq, target_bandwidth, DEFAULT_RIDGE)?;
    let skce = skce_test(
        &skce_preds,
        &skce_targets,
        &skce_kernel,
        config.n_null,
        &mut rng,
        config.alpha,
    )?;

    Ok(EvaluationReport {
        n,
        mean_crps,
        relative_crps,
        skce_n: skce_preds.len(),
        skce_kernel,
        skce,
        ks,
    })
}

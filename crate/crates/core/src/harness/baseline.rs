use serde::{Deserialize, Serialize};

use super::records::{Pred, PredictionRecord};
use crate::error::{Error, Result};

/// Smallest predictive standard deviation the baseline emits.
const SIGMA_FLOOR: f64 = 1e-6;

/// Homoscedastic Gaussian predictor `N(x, sigma²)` with `sigma²` the mean
/// squared training residual `(y - x)²`.
///
/// It is unimodal, so on bimodal data it is miscalibrated by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBaseline {
    pub sigma: f64,
}

impl GaussianBaseline {
    pub const MIN_TRAIN: usize = 10;

    pub fn fit(train: &[(f64, f64)]) -> Result<Self> {
        if train.len() < Self::MIN_TRAIN {
            return Err(Error::param(
                "train",
                format!("need at least {} rows, got {}", Self::MIN_TRAIN, train.len()),
            ));
        }
        if let Some(index) = train.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite { index, value: f64::NAN });
        }
        let mse = crate::sum::sum(train.iter().map(|(x, y)| (y - x).powi(2))) / train.len() as f64;
        Ok(Self {
            sigma: mse.sqrt().max(SIGMA_FLOOR),
        })
    }

    pub fn predict(&self, x: f64, y: f64) -> PredictionRecord {
        PredictionRecord {
            y,
            pred: Pred::Gaussian {
                mu: x,
                sigma: self.sigma,
            },
            x: Some(vec![x]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::{synth_bimodal, SYNTH_NOISE_VAR};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_data_hits_the_floor() {
        let train: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(GaussianBaseline::fit(&train).unwrap().sigma, SIGMA_FLOOR);
        assert!(GaussianBaseline::fit(&train[..5]).is_err());
    }

    #[test]
    fn variance_follows_total_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train = synth_bimodal(100_000, &mut rng);
        let b = GaussianBaseline::fit(&train).unwrap();
        // E sin²(3x/20) for x ~ U[-1, 1] is (1 - sin(0.3)/0.3) / 2.
        let want = 0.5 * (1.0 - 0.3f64.sin() / 0.3) + SYNTH_NOISE_VAR;
        assert!((b.sigma.powi(2) - want).abs() < 0.02 * want);
        let rec = b.predict(0.25, 0.3);
        assert!(rec.validate().is_ok());
        assert_eq!(rec.x, Some(vec![0.25]));
    }
}

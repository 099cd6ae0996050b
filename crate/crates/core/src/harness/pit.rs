use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalDistribution;
use crate::error::{Error, Result};

/// Monotone map `R: [0, 1] -> [0, 1]` fitted to calibration PIT values.
///
/// `R` linearly interpolates the knots `(z_(i), i / (n + 1))` of the sorted
/// PITs, pinned at `R(0) = 0` and `R(1) = 1`. The recalibrated forecast has
/// CDF `R ∘ F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitRecalibrator {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
}

impl PitRecalibrator {
    pub fn fit(pits: &[f64]) -> Result<Self> {
        if pits.len() < 2 {
            return Err(Error::param("pits", "need at least two PIT values"));
        }
        if let Some(&bad) = pits.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(Error::param("pits", format!("{bad} is outside [0, 1]")));
        }
        let mut sorted = pits.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut knots_x = Vec::with_capacity(sorted.len() + 2);
        let mut knots_y = Vec::with_capacity(sorted.len() + 2);
        knots_x.push(0.0);
        knots_y.push(0.0);
        for (i, z) in sorted.into_iter().enumerate() {
            knots_x.push(z);
            knots_y.push((i + 1) as f64 / (n + 1.0));
        }
        knots_x.push(1.0);
        knots_y.push(1.0);
        Ok(Self { knots_x, knots_y })
    }

    /// Evaluates `R(u)`. At a value shared by several PITs the map takes
    /// the middle of their rank range, which keeps the PITs of discrete
    /// forecasts centred.
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let xs = &self.knots_x;
        let ys = &self.knots_y;
        let lo = xs.partition_point(|&x| x < u);
        let hi = xs.partition_point(|&x| x <= u);
        if hi > lo {
            return 0.5 * (ys[lo] + ys[hi - 1]);
        }
        let (x0, y0, x1, y1) = (xs[hi - 1], ys[hi - 1], xs[hi], ys[hi]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    /// Reweights the atoms of `pred` so the result has CDF `R ∘ F` at every
    /// atom.
    pub fn apply(&self, pred: &EmpiricalDistribution) -> EmpiricalDistribution {
        let mut prev = 0.0;
        let mut weights = Vec::with_capacity(pred.len());
        for &c in pred.cum_weights() {
            let r = self.eval(c);
            weights.push((r - prev).max(0.0));
            prev = r;
        }
        EmpiricalDistribution::from_sorted_normalized(pred.values().to_vec(), weights)
    }
}

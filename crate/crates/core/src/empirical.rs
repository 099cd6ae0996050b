//! Weighted empirical distributions on the real line.
//!
//! Every prediction, calibration target law and recalibrated output in this
//! crate is an [`EmpiricalDistribution`]: a finite set of atoms sorted by
//! value, each carrying a nonnegative weight, with weights summing to one.
//!
//! The scoring functionals are evaluated through the CDF representation.
//! For distributions with CDFs `F` and `G`,
//!
//! ```text
//! crps(F, y)     = ∫ (F(t) - 1{t >= y})² dt  = E|M - y| - ½E|M - M'|
//! entropy(F)     = ∫ F(t) (1 - F(t)) dt      = ½E|M - M'|
//! energy(F, G)   = ∫ (F(t) - G(t))² dt       = E|M - M*| - ½E|M - M'| - ½E|M* - M*'|
//! ```
//!
//! Both sides are piecewise constant between atoms, so each integral is a
//! single pass over the (merged) sorted atoms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{sum, CompensatedSum};

/// Weighted point masses on the real line, sorted ascending by value.
///
/// Duplicate atoms are kept as given. The distribution is immutable once
/// built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmpirical", into = "RawEmpirical")]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
    /// Inclusive prefix sums of `weights`; the last entry is exactly 1.
    cum_weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEmpirical {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawEmpirical> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(raw: RawEmpirical) -> Result<Self> {
        EmpiricalDistribution::new(raw.values, Some(raw.weights))
    }
}

impl From<EmpiricalDistribution> for RawEmpirical {
    fn from(d: EmpiricalDistribution) -> Self {
        RawEmpirical {
            values: d.values,
            weights: d.weights,
        }
    }
}

impl EmpiricalDistribution {
    /// Builds a distribution from atoms and optional weights.
    ///
    /// Atoms are sorted, weights normalized to sum to one. Missing weights
    /// mean uniform weights.
    pub fn new(values: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let n = values.len();
        let weights = match weights {
            None => vec![1.0 / n as f64; n],
            Some(w) => {
                if w.len() != n {
                    return Err(Error::LengthMismatch(n, w.len()));
                }
                for (index, &weight) in w.iter().enumerate() {
                    if !weight.is_finite() {
                        return Err(Error::NonFinite { index, value: weight });
                    }
                    if weight < 0.0 {
                        return Err(Error::NegativeWeight { index, weight });
                    }
                }
                let total = sum(w.iter().copied());
                if total <= 0.0 {
                    return Err(Error::ZeroMass);
                }
                w.into_iter().map(|x| x / total).collect()
            }
        };

        let (values, weights) = if values.windows(2).all(|p| p[0] <= p[1]) {
            (values, weights)
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            (
                order.iter().map(|&i| values[i]).collect(),
                order.iter().map(|&i| weights[i]).collect(),
            )
        };
        Ok(Self::from_sorted_normalized(values, weights))
    }

    /// Uniform weights over the given atoms.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        Self::new(values, None)
    }

    /// The Dirac mass at `c`.
    pub fn point_mass(c: f64) -> Self {
        assert!(c.is_finite(), "point mass location must be finite");
        Self {
            values: vec![c],
            weights: vec![1.0],
            cum_weights: vec![1.0],
        }
    }

    /// Caller guarantees: nonempty, same length, values ascending and finite,
    /// weights nonnegative and summing to one up to round-off.
    pub(crate) fn from_sorted_normalized(values: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty() && values.len() == weights.len());
        debug_assert!(values.windows(2).all(|p| p[0] <= p[1]));
        let mut cum_weights = Vec::with_capacity(weights.len());
        let mut acc = CompensatedSum::new();
        for &w in &weights {
            acc.add(w);
            cum_weights.push(acc.value().min(1.0));
        }
        if let Some(last) = cum_weights.last_mut() {
            *last = 1.0;
        }
        Self {
            values,
            weights,
            cum_weights,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Inclusive prefix sums of the weights (last entry is 1).
    pub fn cum_weights(&self) -> &[f64] {
        &self.cum_weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        sum(self.values.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    /// Iterator over `(value, weight)` atoms.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    /// Right-continuous CDF, `P(M <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= t);
        if k == 0 {
            0.0
        } else {
            self.cum_weights[k - 1]
        }
    }

    /// Generalized inverse CDF: the smallest atom `v` with `cdf(v) >= u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::param("u", format!("{u} is outside [0, 1]")));
        }
        let k = self.cum_weights.partition_point(|&c| c < u);
        Ok(self.values[k.min(self.values.len() - 1)])
    }

    /// Continuous ranked probability score of this forecast at outcome `y`.
    pub fn crps(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::NonFinite { index: 0, value: y });
        }
        let v = &self.values;
        let c = &self.cum_weights;
        let n = v.len();
        let k = v.partition_point(|&x| x < y);
        let mut acc = CompensatedSum::new();
        // Left of y the indicator is 0.
        for i in 0..k {
            let right = if i + 1 < k { v[i + 1] } else { y };
            acc.add(c[i] * c[i] * (right - v[i]));
        }
        // Between y and the first atom at or above it the indicator is 1.
        if k < n {
            let f = if k == 0 { 0.0 } else { c[k - 1] };
            acc.add((1.0 - f) * (1.0 - f) * (v[k] - y));
            for i in k..n - 1 {
                let g = 1.0 - c[i];
                acc.add(g * g * (v[i + 1] - v[i]));
            }
        }
        Ok(acc.value().max(0.0))
    }

    /// Generalized entropy under the CRPS, `½E|M - M'|`.
    pub fn entropy(&self) -> f64 {
        let v = &self.values;
        let c = &self.cum_weights;
        let acc: CompensatedSum = (0..v.len().saturating_sub(1))
            .map(|i| c[i] * (1.0 - c[i]) * (v[i + 1] - v[i]))
            .collect();
        acc.value().max(0.0)
    }

    /// `n` i.i.d. draws, deterministic for a seeded generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.cum_weights.partition_point(|&c| c <= u);
        self.values[k.min(self.values.len() - 1)]
    }

    /// The mixture `lambda * self + (1 - lambda) * other`, as the merged
    /// weighted atom set.
    pub fn mixture(&self, other: &Self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::param("lambda", format!("{lambda} is outside [0, 1]")));
        }
        let mut atoms: Vec<(f64, f64)> = self
            .atoms()
            .map(|(v, w)| (v, lambda * w))
            .chain(other.atoms().map(|(v, w)| (v, (1.0 - lambda) * w)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, weights) = atoms.into_iter().unzip();
        Self::new(values, Some(weights))
    }

    /// Atoms with equal values merged and zero-weight atoms removed.
    pub fn canonical(&self) -> Self {
        let mut values = Vec::with_capacity(self.len());
        let mut weights: Vec<f64> = Vec::with_capacity(self.len());
        for (v, w) in self.atoms() {
            if w == 0.0 {
                continue;
            }
            match values.last() {
                Some(&last) if last == v => *weights.last_mut().unwrap() += w,
                _ => {
                    values.push(v);
                    weights.push(w);
                }
            }
        }
        if values.is_empty() {
            // All-zero weights cannot be constructed, so this is unreachable
            // for valid inputs; keep the first atom to stay total.
            return Self::point_mass(self.values[0]);
        }
        Self::from_sorted_normalized(values, weights)
    }
}

/// Energy distance `∫ (F - G)²`, evaluated by a merge of the two sorted
/// atom lists in `O(n + m)`.
pub fn energy_distance(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    let (pv, pc) = (&p.values[..], &p.cum_weights[..]);
    let (qv, qc) = (&q.values[..], &q.cum_weights[..]);
    let (n, m) = (pv.len(), qv.len());
    let (mut i, mut j) = (0, 0);
    let (mut fp, mut fq) = (0.0, 0.0);
    let mut prev = pv[0].min(qv[0]);
    // Every term is nonnegative, so a plain running sum is accurate.
    let mut acc = 0.0;
    while i < n && j < m {
        let (a, b) = (pv[i], qv[j]);
        let t = a.min(b);
        let d = fp - fq;
        acc += d * d * (t - prev);
        if a <= t {
            fp = pc[i];
            i += 1;
        }
        if b <= t {
            fq = qc[j];
            j += 1;
        }
        prev = t;
    }
    // One side is exhausted and its CDF is 1 from here on.
    let (rest_v, rest_c, start, mut f, other) = if i < n {
        (pv, pc, i, fp, fq)
    } else {
        (qv, qc, j, fq, fp)
    };
    for k in start..rest_v.len() {
        let d = f - other;
        acc += d * d * (rest_v[k] - prev);
        f = rest_c[k];
        prev = rest_v[k];
    }
    acc.max(0.0)
}

/// Energy distance by explicit double sums over atoms, `O(nm + n² + m²)`.
///
/// Reference implementation for tests and small inputs.
pub fn energy_distance_bruteforce(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    let mean_abs = |a: &EmpiricalDistribution, b: &EmpiricalDistribution| {
        let mut acc = CompensatedSum::new();
        for (u, wu) in a.atoms() {
            for (v, wv) in b.atoms() {
                acc.add(wu * wv * (u - v).abs());
            }
        }
        acc.value()
    };
    mean_abs(p, q) - 0.5 * mean_abs(p, p) - 0.5 * mean_abs(q, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crps_bruteforce(q: &EmpiricalDistribution, y: f64) -> f64 {
        let e1: f64 = q.atoms().map(|(v, w)| w * (v - y).abs()).sum();
        let mut e2 = 0.0;
        for (u, wu) in q.atoms() {
            for (v, wv) in q.atoms() {
                e2 += wu * wv * (u - v).abs();
            }
        }
        e1 - 0.5 * e2
    }

    fn random_dist(rng: &mut ChaCha8Rng, max_len: usize) -> EmpiricalDistribution {
        let n = rng.random_range(1..=max_len);
        let values = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let weights = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        EmpiricalDistribution::new(values, Some(weights)).unwrap()
    }

    fn arb_dist() -> impl Strategy<Value = EmpiricalDistribution> {
        prop::collection::vec((-10.0f64..10.0, 0.01f64..1.0), 1..24).prop_map(|atoms| {
            let (v, w) = atoms.into_iter().unzip();
            EmpiricalDistribution::new(v, Some(w)).unwrap()
        })
    }

    #[test]
    fn construction_sorts_and_normalizes() {
        let d = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0], None).unwrap();
        assert_eq!(d.values(), &[1.0, 2.0, 3.0]);
        for &w in d.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let d = EmpiricalDistribution::new(vec![0.0], Some(vec![5.0])).unwrap();
        assert_eq!(d.weights(), &[1.0]);
        let d = EmpiricalDistribution::new(vec![1.0, 1.0], Some(vec![0.5, 0.5])).unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            EmpiricalDistribution::new(vec![], None),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            EmpiricalDistribution::new(vec![1.0, 2.0], Some(vec![0.5, -0.1])),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            EmpiricalDistribution::new(vec![1.0, 2.0], Some(vec![0.0, 0.0])),
            Err(Error::ZeroMass)
        ));
        assert!(matches!(
            EmpiricalDistribution::new(vec![1.0, f64::NAN], None),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            EmpiricalDistribution::new(vec![1.0, 2.0], Some(vec![1.0])),
            Err(Error::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn crps_closed_forms() {
        let d = EmpiricalDistribution::point_mass(2.0);
        assert_eq!(d.crps(5.0).unwrap(), 3.0);
        let d = EmpiricalDistribution::uniform(vec![0.0, 1.0]).unwrap();
        assert!((d.crps(0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(d.crps(f64::INFINITY).is_err());
    }

    #[test]
    fn crps_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let q = random_dist(&mut rng, 32);
            let y = rng.random_range(-12.0..12.0);
            let fast = q.crps(y).unwrap();
            let slow = crps_bruteforce(&q, y);
            assert!((fast - slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn entropy_closed_forms_and_oracle() {
        assert_eq!(EmpiricalDistribution::point_mass(4.0).entropy(), 0.0);
        let d = EmpiricalDistribution::uniform(vec![0.0, 1.0]).unwrap();
        assert!((d.entropy() - 0.25).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let q = random_dist(&mut rng, 32);
            let mut e2 = 0.0;
            for (u, wu) in q.atoms() {
                for (v, wv) in q.atoms() {
                    e2 += wu * wv * (u - v).abs();
                }
            }
            assert!((q.entropy() - 0.5 * e2).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_distance_closed_forms() {
        let a = EmpiricalDistribution::point_mass(0.0);
        let b = EmpiricalDistribution::point_mass(1.0);
        assert_eq!(energy_distance(&a, &b), 1.0);
        assert_eq!(energy_distance_bruteforce(&a, &b), 1.0);
        assert_eq!(energy_distance_bruteforce(&a, &a), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let q = random_dist(&mut rng, 40);
            assert_eq!(energy_distance(&q, &q), 0.0);
        }
    }

    #[test]
    fn energy_distance_matches_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let p = random_dist(&mut rng, 64);
            let q = random_dist(&mut rng, 64);
            let fast = energy_distance(&p, &q);
            let slow = energy_distance_bruteforce(&p, &q);
            assert!((fast - slow).abs() <= 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn energy_distance_of_reordered_representation() {
        let p = EmpiricalDistribution::new(vec![0.5, -1.0, 2.0, 0.5], Some(vec![0.1, 0.2, 0.3, 0.4])).unwrap();
        let q = EmpiricalDistribution::new(vec![2.0, 0.5, -1.0], Some(vec![0.3, 0.5, 0.2])).unwrap();
        assert!(energy_distance(&p, &q) < 1e-12);
        assert!(energy_distance(&p, &p.canonical()) < 1e-12);
    }

    #[test]
    fn cdf_conventions() {
        let d = EmpiricalDistribution::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.cdf(2.0), 0.5);
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(4.0), 1.0);
        assert_eq!(d.cdf(100.0), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = random_dist(&mut rng, 20);
            let t = rng.random_range(-11.0..11.0);
            let naive: f64 = q.atoms().filter(|&(v, _)| v <= t).map(|(_, w)| w).sum();
            assert!((q.cdf(t) - naive).abs() < 1e-12);
            assert_eq!(q.cdf(q.max()), 1.0);
        }
    }

    #[test]
    fn quantile_conventions() {
        let d = EmpiricalDistribution::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 2.0);
        assert_eq!(d.quantile(0.0).unwrap(), 1.0);
        assert_eq!(d.quantile(1.0).unwrap(), 4.0);
        assert!(d.quantile(1.5).is_err());
        assert!(d.quantile(-0.1).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_dist(&mut rng, 30);
        for _ in 0..1000 {
            let u: f64 = rng.random();
            let v = q.quantile(u).unwrap();
            assert!(q.cdf(v) >= u);
            assert!(q.values().contains(&v));
        }
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = EmpiricalDistribution::point_mass(3.5);
        assert!(d.sample(&mut rng, 100).iter().all(|&x| x == 3.5));

        let d = EmpiricalDistribution::uniform(vec![0.0, 1.0]).unwrap();
        let xs = d.sample(&mut rng, 100_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);

        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(99), 50);
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(99), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn score_divergence_consistency() {
        // Mean CRPS of q under draws from p minus H(p) estimates d(p, q).
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = random_dist(&mut rng, 12);
        let q = random_dist(&mut rng, 12);
        let n = 200_000;
        let scores: Vec<f64> = p.sample(&mut rng, n).into_iter().map(|y| q.crps(y).unwrap()).collect();
        let mean = scores.iter().sum::<f64>() / n as f64;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let target = energy_distance(&p, &q);
        assert!(((mean - p.entropy()) - target).abs() <= 3.0 * se);
    }

    proptest! {
        #[test]
        fn nonnegative_and_symmetric(p in arb_dist(), q in arb_dist(), y in -12.0f64..12.0) {
            prop_assert!(p.crps(y).unwrap() >= 0.0);
            prop_assert!(p.entropy() >= 0.0);
            let d = energy_distance(&p, &q);
            prop_assert!(d >= 0.0);
            prop_assert!((d - energy_distance(&q, &p)).abs() <= 1e-12);
        }

        #[test]
        fn entropy_is_concave(p in arb_dist(), q in arb_dist(), lambda in 0.01f64..0.99) {
            let mix = p.mixture(&q, lambda).unwrap();
            let chord = lambda * p.entropy() + (1.0 - lambda) * q.entropy();
            prop_assert!(mix.entropy() >= chord - 1e-12);
        }
    }
}

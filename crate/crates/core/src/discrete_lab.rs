//! Exact computations on finite joint distributions of `(X, Y)` with a
//! prediction that is a deterministic function of `X`.
//!
//! Every expectation here is a finite sum, so the score decomposition
//!
//! ```text
//! E S(Q, Y) = E d(P_{Y|Q}, Q) + (E H(P_{Y|Q}) - E H(P_{Y|X})) + E H(P_{Y|X})
//! ```
//!
//! and the properties of the exact recalibration `Q ↦ P_{Y|Q}` can be
//! checked to round-off.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::empirical::{energy_distance, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::sum::{sum, CompensatedSum};

/// Largest supported size of either support.
pub const MAX_SUPPORT: usize = 64;

/// Weight tolerance when deciding whether two predictions are identical.
const SAME_PREDICTION_TOL: f64 = 1e-12;

/// Finite joint law of `(X, Y)` plus a deterministic model `X -> Q`.
#[derive(Debug, Clone)]
pub struct DiscreteWorld {
    x_support: Vec<f64>,
    y_support: Vec<f64>,
    px: Vec<f64>,
    py_given_x: Vec<Vec<f64>>,
    model: Vec<EmpiricalDistribution>,
}

/// One equivalence class of `X` values sharing a prediction.
#[derive(Debug, Clone)]
pub struct PredictionClass {
    /// Indices into the `X` support.
    pub members: Vec<usize>,
    /// `P(Q = q)`.
    pub prob: f64,
    pub prediction: EmpiricalDistribution,
    /// `P_{Y | Q = q}`.
    pub conditional: EmpiricalDistribution,
}

/// Terms of the CRPS score decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub total_score: f64,
    pub calibration_error: f64,
    pub lack_of_sharpness: f64,
    pub aleatoric: f64,
}

impl Decomposition {
    /// `total - (calibration + sharpness + aleatoric)`.
    pub fn residual(&self) -> f64 {
        self.total_score - (self.calibration_error + self.lack_of_sharpness + self.aleatoric)
    }
}

/// A sampled `(x, y, prediction)` triple.
#[derive(Debug, Clone)]
pub struct WorldSample {
    pub x: f64,
    pub x_index: usize,
    pub y: f64,
    pub prediction: EmpiricalDistribution,
}

fn check_probabilities(name: &'static str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::param(name, "entries must be finite and nonnegative"));
    }
    let s = sum(p.iter().copied());
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::param(name, format!("sums to {s}, expected 1")));
    }
    Ok(())
}

fn check_support(name: &'static str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptyInput);
    }
    if s.len() > MAX_SUPPORT {
        return Err(Error::param(name, format!("at most {MAX_SUPPORT} states")));
    }
    if let Some((index, &value)) = s.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    for i in 0..s.len() {
        if s[i + 1..].contains(&s[i]) {
            return Err(Error::param(name, "states must be distinct"));
        }
    }
    Ok(())
}

impl DiscreteWorld {
    pub fn new(
        x_support: Vec<f64>,
        y_support: Vec<f64>,
        px: Vec<f64>,
        py_given_x: Vec<Vec<f64>>,
        model: Vec<EmpiricalDistribution>,
    ) -> Result<Self> {
        check_support("x_support", &x_support)?;
        check_support("y_support", &y_support)?;
        let nx = x_support.len();
        if px.len() != nx {
            return Err(Error::LengthMismatch(nx, px.len()));
        }
        if py_given_x.len() != nx {
            return Err(Error::LengthMismatch(nx, py_given_x.len()));
        }
        if model.len() != nx {
            return Err(Error::LengthMismatch(nx, model.len()));
        }
        check_probabilities("px", &px)?;
        for row in &py_given_x {
            if row.len() != y_support.len() {
                return Err(Error::LengthMismatch(y_support.len(), row.len()));
            }
            check_probabilities("py_given_x", row)?;
        }
        for q in &model {
            if q.values().iter().any(|v| !y_support.contains(v)) {
                return Err(Error::param("model", "prediction atoms must lie in the Y support"));
            }
        }
        Ok(Self {
            x_support,
            y_support,
            px,
            py_given_x,
            model,
        })
    }

    pub fn x_support(&self) -> &[f64] {
        &self.x_support
    }

    pub fn y_support(&self) -> &[f64] {
        &self.y_support
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn py_given_x(&self) -> &[Vec<f64>] {
        &self.py_given_x
    }

    pub fn model(&self) -> &[EmpiricalDistribution] {
        &self.model
    }

    /// Same joint law, different model.
    pub fn with_model(&self, model: Vec<EmpiricalDistribution>) -> Result<Self> {
        Self::new(
            self.x_support.clone(),
            self.y_support.clone(),
            self.px.clone(),
            self.py_given_x.clone(),
            model,
        )
    }

    fn law_on_y(&self, probs: &[f64]) -> EmpiricalDistribution {
        // Rows are validated, so the mass is positive.
        EmpiricalDistribution::new(self.y_support.clone(), Some(probs.to_vec())).expect("validated probability row")
    }

    /// `P_{Y | X = x_i}`.
    pub fn conditional_given_x(&self, i: usize) -> EmpiricalDistribution {
        self.law_on_y(&self.py_given_x[i])
    }

    /// Marginal `P_Y`.
    pub fn marginal_y(&self) -> EmpiricalDistribution {
        let probs: Vec<f64> = (0..self.y_support.len())
            .map(|j| sum(self.px.iter().zip(&self.py_given_x).map(|(p, row)| p * row[j])))
            .collect();
        self.law_on_y(&probs)
    }

    /// Partition of the `X` support by identical predictions, with the
    /// Bayes-mixed conditional `P_{Y|Q=q}` of each class.
    ///
    /// Classes with zero probability keep the prediction itself as their
    /// conditional; they carry no weight in any expectation.
    pub fn group_by_prediction(&self) -> Vec<PredictionClass> {
        let canon: Vec<EmpiricalDistribution> = self.model.iter().map(|q| q.canonical()).collect();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..canon.len() {
            match classes
                .iter_mut()
                .find(|members| same_prediction(&canon[members[0]], &canon[i]))
            {
                Some(members) => members.push(i),
                None => classes.push(vec![i]),
            }
        }
        classes
            .into_iter()
            .map(|members| {
                let prob = sum(members.iter().map(|&i| self.px[i]));
                let prediction = self.model[members[0]].clone();
                let conditional = if prob > 0.0 {
                    let probs: Vec<f64> = (0..self.y_support.len())
                        .map(|j| sum(members.iter().map(|&i| self.px[i] * self.py_given_x[i][j])) / prob)
                        .collect();
                    self.law_on_y(&probs)
                } else {
                    prediction.clone()
                };
                PredictionClass {
                    members,
                    prob,
                    prediction,
                    conditional,
                }
            })
            .collect()
    }

    /// `E_X H(P_{Y|X})`.
    pub fn aleatoric(&self) -> f64 {
        sum((0..self.x_support.len()).map(|i| self.px[i] * self.conditional_given_x(i).entropy()))
    }

    /// Expected CRPS and its decomposition into calibration error, lack of
    /// sharpness (`I(Y; X | Q)`) and aleatoric uncertainty.
    pub fn decomposition_terms(&self) -> Decomposition {
        let mut total = CompensatedSum::new();
        for (i, q) in self.model.iter().enumerate() {
            for (j, &y) in self.y_support.iter().enumerate() {
                let p = self.px[i] * self.py_given_x[i][j];
                if p > 0.0 {
                    total.add(p * q.crps(y).expect("finite support"));
                }
            }
        }
        let classes = self.group_by_prediction();
        let calibration_error = sum(classes
            .iter()
            .map(|c| c.prob * energy_distance(&c.conditional, &c.prediction)));
        let entropy_given_q = sum(classes.iter().map(|c| c.prob * c.conditional.entropy()));
        let aleatoric = self.aleatoric();
        Decomposition {
            total_score: total.value(),
            calibration_error,
            lack_of_sharpness: entropy_given_q - aleatoric,
            aleatoric,
        }
    }

    /// The world with the model replaced by its exact recalibration
    /// `x ↦ P_{Y | Q = model(x)}`.
    pub fn exact_recalibrate(&self) -> Self {
        let mut model = self.model.clone();
        for class in self.group_by_prediction() {
            for &i in &class.members {
                model[i] = class.conditional.clone();
            }
        }
        Self { model, ..self.clone() }
    }

    /// `n` i.i.d. draws of `(x, y, Q(x))`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<WorldSample> {
        let x_law = EmpiricalDistribution::new(
            (0..self.x_support.len()).map(|i| i as f64).collect(),
            Some(self.px.clone()),
        )
        .expect("validated px");
        let y_laws: Vec<EmpiricalDistribution> = (0..self.x_support.len())
            .map(|i| {
                EmpiricalDistribution::new(
                    (0..self.y_support.len()).map(|j| j as f64).collect(),
                    Some(self.py_given_x[i].clone()),
                )
                .expect("validated row")
            })
            .collect();
        (0..n)
            .map(|_| {
                let xi = x_law.sample_one(rng) as usize;
                let yj = y_laws[xi].sample_one(rng) as usize;
                WorldSample {
                    x: self.x_support[xi],
                    x_index: xi,
                    y: self.y_support[yj],
                    prediction: self.model[xi].clone(),
                }
            })
            .collect()
    }
}

fn same_prediction(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> bool {
    a.len() == b.len()
        && a.values() == b.values()
        && a.weights()
            .iter()
            .zip(b.weights())
            .all(|(x, y)| (x - y).abs() <= SAME_PREDICTION_TOL)
}

/// How the model of a random world relates to the true conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRegime {
    /// `Q = P_{Y|X}`.
    TrueConditional,
    /// One random prediction for every `x`.
    Constant,
    /// Each conditional multiplied by random factors and renormalized.
    Perturbed,
    /// The `X` support is split into groups sharing one perturbed
    /// prediction.
    Grouped,
}

impl ModelRegime {
    pub const ALL: [ModelRegime; 4] = [
        ModelRegime::TrueConditional,
        ModelRegime::Constant,
        ModelRegime::Perturbed,
        ModelRegime::Grouped,
    ];
}

fn dirichlet_ones<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / s).collect()
}

/// Random world with `nx` feature states and `ny` target states; `px` and
/// the rows of `P_{Y|X}` are Dirichlet(1).
pub fn random_world<R: Rng + ?Sized>(nx: usize, ny: usize, regime: ModelRegime, rng: &mut R) -> Result<DiscreteWorld> {
    if nx == 0 || ny == 0 || nx > MAX_SUPPORT || ny > MAX_SUPPORT {
        return Err(Error::param("support size", format!("must be in 1..={MAX_SUPPORT}")));
    }
    let x_support: Vec<f64> = (0..nx).map(|i| i as f64).collect();
    let mut y_support: Vec<f64> = Vec::with_capacity(ny);
    while y_support.len() < ny {
        let y = (rng.random_range(-5.0..5.0) * 100.0f64).round() / 100.0;
        if !y_support.contains(&y) {
            y_support.push(y);
        }
    }
    let px = dirichlet_ones(nx, rng);
    let py_given_x: Vec<Vec<f64>> = (0..nx).map(|_| dirichlet_ones(ny, rng)).collect();

    let law = |probs: Vec<f64>| EmpiricalDistribution::new(y_support.clone(), Some(probs));
    let perturb =
        |row: &[f64], rng: &mut R| -> Vec<f64> { row.iter().map(|p| p * rng.random_range(0.2..5.0) + 1e-3).collect() };
    let model = match regime {
        ModelRegime::TrueConditional => py_given_x
            .iter()
            .map(|row| law(row.clone()))
            .collect::<Result<Vec<_>>>()?,
        ModelRegime::Constant => {
            let q = law(dirichlet_ones(ny, rng))?;
            vec![q; nx]
        }
        ModelRegime::Perturbed => py_given_x
            .iter()
            .map(|row| {
                let p = perturb(row, rng);
                law(p)
            })
            .collect::<Result<Vec<_>>>()?,
        ModelRegime::Grouped => {
            let groups = rng.random_range(1..=nx.max(2) / 2 + 1);
            let shared: Vec<EmpiricalDistribution> = (0..groups)
                .map(|_| {
                    let base = dirichlet_ones(ny, rng);
                    law(perturb(&base, rng))
                })
                .collect::<Result<Vec<_>>>()?;
            (0..nx).map(|_| shared[rng.random_range(0..groups)].clone()).collect()
        }
    };
    DiscreteWorld::new(x_support, y_support, px, py_given_x, model)
}

/// Summary of a batch of numerical property checks on random worlds.
#[derive(Debug, Clone, Serialize)]
pub struct LabSummary {
    pub worlds: usize,
    pub max_identity_residual: f64,
    pub max_recalibrated_calibration_error: f64,
    pub max_sharpness_change: f64,
    pub min_entropy_gap: f64,
    pub min_lack_of_sharpness: f64,
    pub failures: Vec<String>,
}

impl LabSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the decomposition identity, exact-recalibration, monotone-entropy
/// and nonnegative-information checks on `worlds` random worlds.
pub fn run_property_suite<R: Rng + ?Sized>(worlds: usize, rng: &mut R) -> Result<LabSummary> {
    let mut summary = LabSummary {
        worlds,
        max_identity_residual: 0.0,
        max_recalibrated_calibration_error: 0.0,
        max_sharpness_change: 0.0,
        min_entropy_gap: f64::INFINITY,
        min_lack_of_sharpness: f64::INFINITY,
        failures: Vec::new(),
    };
    for w in 0..worlds {
        let regime = ModelRegime::ALL[w % ModelRegime::ALL.len()];
        let nx = rng.random_range(1..=5);
        let ny = rng.random_range(1..=5);
        let world = random_world(nx, ny, regime, rng)?;
        let before = world.decomposition_terms();
        let recal = world.exact_recalibrate();
        let after = recal.decomposition_terms();

        let residual = before.residual().abs();
        let cal_after = after.calibration_error;
        let sharp_change = (after.lack_of_sharpness - before.lack_of_sharpness).abs();
        let gap = world.marginal_y().entropy() - world.aleatoric();

        summary.max_identity_residual = summary.max_identity_residual.max(residual);
        summary.max_recalibrated_calibration_error = summary.max_recalibrated_calibration_error.max(cal_after);
        summary.max_sharpness_change = summary.max_sharpness_change.max(sharp_change);
        summary.min_entropy_gap = summary.min_entropy_gap.min(gap);
        summary.min_lack_of_sharpness = summary.min_lack_of_sharpness.min(before.lack_of_sharpness);

        let mut fail = |what: &str| summary.failures.push(format!("world {w} ({regime:?}): {what}"));
        if residual > 1e-10 {
            fail(&format!("decomposition residual {residual:e}"));
        }
        if after.residual().abs() > 1e-10 {
            fail("decomposition residual after recalibration");
        }
        if cal_after > 1e-12 {
            fail(&format!("calibration error after recalibration {cal_after:e}"));
        }
        if sharp_change > 1e-10 {
            fail(&format!("sharpness changed by {sharp_change:e}"));
        }
        if gap < -1e-12 {
            fail(&format!("marginal entropy below conditional entropy by {gap:e}"));
        }
        if before.lack_of_sharpness < -1e-12 {
            fail("negative conditional mutual information");
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pm(c: f64) -> EmpiricalDistribution {
        EmpiricalDistribution::point_mass(c)
    }

    fn coin() -> EmpiricalDistribution {
        EmpiricalDistribution::uniform(vec![0.0, 1.0]).unwrap()
    }

    /// X uniform on {0, 1}, Y = X.
    fn deterministic_world(model: Vec<EmpiricalDistribution>) -> DiscreteWorld {
        DiscreteWorld::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            model,
        )
        .unwrap()
    }

    /// X uniform on {0, 1}, Y uniform on {0, 1} independent of X.
    fn noise_world(model: Vec<EmpiricalDistribution>) -> DiscreteWorld {
        DiscreteWorld::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            model,
        )
        .unwrap()
    }

    fn assert_close(d: Decomposition, want: [f64; 4]) {
        let got = [d.total_score, d.calibration_error, d.lack_of_sharpness, d.aleatoric];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn validation() {
        assert!(DiscreteWorld::new(vec![0.0], vec![0.0], vec![0.9], vec![vec![1.0]], vec![pm(0.0)]).is_err());
        assert!(DiscreteWorld::new(vec![0.0], vec![0.0], vec![1.0], vec![vec![1.0]], vec![pm(2.0)]).is_err());
        assert!(DiscreteWorld::new(
            vec![0.0, 0.0],
            vec![0.0],
            vec![0.5, 0.5],
            vec![vec![1.0]; 2],
            vec![pm(0.0); 2]
        )
        .is_err());
    }

    #[test]
    fn decomposition_hand_examples() {
        assert_close(
            deterministic_world(vec![pm(0.0), pm(1.0)]).decomposition_terms(),
            [0.0, 0.0, 0.0, 0.0],
        );
        assert_close(
            deterministic_world(vec![coin(), coin()]).decomposition_terms(),
            [0.25, 0.0, 0.25, 0.0],
        );
        assert_close(
            noise_world(vec![pm(0.0), pm(0.0)]).decomposition_terms(),
            [0.5, 0.25, 0.0, 0.25],
        );
    }

    #[test]
    fn grouping_examples() {
        let classes = deterministic_world(vec![coin(), coin()]).group_by_prediction();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].members, vec![0, 1]);
        assert!((classes[0].prob - 1.0).abs() < 1e-15);
        assert_eq!(classes[0].conditional.weights(), &[0.5, 0.5]);

        let w = deterministic_world(vec![pm(0.0), pm(1.0)]);
        let classes = w.group_by_prediction();
        assert_eq!(classes.len(), 2);
        for c in &classes {
            let x = c.members[0];
            assert!(energy_distance(&c.conditional, &w.conditional_given_x(x)) == 0.0);
        }

        // Three states, x0 and x2 share a prediction.
        let w = DiscreteWorld::new(
            vec![0.0, 1.0, 2.0],
            vec![-1.0, 0.0, 1.0],
            vec![0.2, 0.3, 0.5],
            vec![vec![0.6, 0.4, 0.0], vec![0.0, 0.0, 1.0], vec![0.1, 0.1, 0.8]],
            vec![coin(), pm(1.0), coin()]
                .into_iter()
                .map(|q| EmpiricalDistribution::new(q.values().to_vec(), Some(q.weights().to_vec())).unwrap())
                .collect(),
        )
        .unwrap();
        let classes = w.group_by_prediction();
        assert_eq!(classes.len(), 2);
        let mixed = classes.iter().find(|c| c.members == vec![0, 2]).unwrap();
        assert!((mixed.prob - 0.7).abs() < 1e-15);
        // (0.2 * row0 + 0.5 * row2) / 0.7
        let want = [(0.12 + 0.05) / 0.7, (0.08 + 0.05) / 0.7, 0.4 / 0.7];
        for (g, w) in mixed.conditional.weights().iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn recalibration_examples() {
        let w = noise_world(vec![pm(0.0), pm(0.0)]);
        let r = w.exact_recalibrate();
        for q in r.model() {
            assert_eq!(q.values(), &[0.0, 1.0]);
            assert_eq!(q.weights(), &[0.5, 0.5]);
        }
        assert_close(r.decomposition_terms(), [0.25, 0.0, 0.0, 0.25]);

        // Auto-calibrated world is a fixed point.
        let w = deterministic_world(vec![coin(), coin()]);
        let r = w.exact_recalibrate();
        for (a, b) in w.model().iter().zip(r.model()) {
            assert_eq!(a.values(), b.values());
            for (x, y) in a.weights().iter().zip(b.weights()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_world_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let summary = run_property_suite(50, &mut rng).unwrap();
        assert!(summary.passed(), "{:?}", summary.failures);
    }

    #[test]
    fn entropy_gap_vanishes_iff_rows_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..50 {
            let mut w = random_world(4, 4, ModelRegime::TrueConditional, &mut rng).unwrap();
            let gap = w.marginal_y().entropy() - w.aleatoric();
            assert!(gap > 1e-10);
            assert!(w.decomposition_terms().lack_of_sharpness.abs() <= 1e-10);

            let row = w.py_given_x[0].clone();
            w.py_given_x = vec![row; 4];
            let gap = w.marginal_y().entropy() - w.aleatoric();
            assert!(gap.abs() <= 1e-10);
        }
    }

    #[test]
    fn sampling() {
        let w = deterministic_world(vec![pm(0.0), pm(1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let s = w.sample(100_000, &mut rng);
        assert!(s.iter().all(|t| t.y == t.x));
        let ones = s.iter().filter(|t| t.x_index == 1).count() as f64 / s.len() as f64;
        assert!((ones - 0.5).abs() < 0.01);
        assert_eq!(s[7].prediction, w.model()[s[7].x_index]);

        let a: Vec<f64> = w
            .sample(20, &mut ChaCha8Rng::seed_from_u64(3))
            .iter()
            .map(|t| t.y)
            .collect();
        let b: Vec<f64> = w
            .sample(20, &mut ChaCha8Rng::seed_from_u64(3))
            .iter()
            .map(|t| t.y)
            .collect();
        assert_eq!(a, b);
    }
}

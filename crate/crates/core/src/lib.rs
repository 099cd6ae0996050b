//! Nonparametric recalibration of probabilistic regression models.
//!
//! Predictions are weighted empirical distributions on the real line. A
//! calibration map `Q ↦ P(Y | Q)` is estimated from held-out
//! `(prediction, target)` pairs with a conditional kernel mean embedding
//! under the Energy Distance Kernel, and turned back into an explicit
//! distribution by projecting the embedding weights onto the simplex.
//!
//! Modules:
//!
//! - [`empirical`]: empirical distributions, CRPS, generalized entropy and
//!   the `O(n log n)` energy distance.
//! - [`kernels`]: Laplace, Brownian and Energy Distance kernels, Gram
//!   matrices and median-heuristic bandwidths.
//! - [`ckme`]: the fitted [`CalibrationMap`] and simplex projection.
//! - [`cal_tests`]: PIT/Kolmogorov-Smirnov and SKCE calibration tests.
//! - [`discrete_lab`]: exact finite worlds for checking the score
//!   decomposition and exact recalibration.
//! - [`harness`]: synthetic data, baselines, file records and the
//!   end-to-end evaluation protocol.

pub mod ckme;
pub mod discrete_lab;
pub mod empirical;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod sum;

pub use cal_tests::{ks_uniform_test, pit_values, skce_test, skce_unbiased, TestMethod, TestReport};
pub use ckme::{project_simplex, CalibrationMap};
pub use discrete_lab::{Decomposition, DiscreteWorld};
pub use empirical::{energy_distance, energy_distance_bruteforce, EmpiricalDistribution};
pub use error::{Error, Result};
pub use kernels::{BandwidthMode, KernelConfig};

//! End-to-end harness: synthetic data, a Gaussian baseline predictor, the
//! PIT recalibration baseline, prediction records and evaluation.

mod baseline;
mod data;
mod evaluate;
mod pit;
mod protocol;
mod records;

pub use baseline::GaussianBaseline;
pub use data::{split_indices, synth_bimodal, Split, DEFAULT_SYNTH_N, SYNTH_NOISE_VAR};
pub use evaluate::{evaluate, EvalConfig, EvaluationReport};
pub use pit::PitRecalibrator;
pub use protocol::{run_bimodal_experiment, ExperimentConfig, ExperimentOutcome};
pub use records::{empiricalize, Pred, PredictionRecord, RunConfig, DEFAULT_GRID_SIZE};

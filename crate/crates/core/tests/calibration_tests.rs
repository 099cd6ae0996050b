use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use kme_recal::discrete_lab::{random_world, ModelRegime};
use kme_recal::harness::{run_bimodal_experiment, ExperimentConfig, RunConfig};
use kme_recal::{ks_uniform_test, pit_values, skce_test, DiscreteWorld, EmpiricalDistribution, KernelConfig};

fn skce_rejects(world: &DiscreteWorld, n: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = world.sample(n, &mut rng);
    let preds: Vec<EmpiricalDistribution> = samples.iter().map(|s| s.prediction.clone()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let config = KernelConfig::explicit(1.0, 1.0, 1e-3).unwrap();
    skce_test(&preds, &ys, &config, 99, &mut rng, 0.05).unwrap().reject
}

#[test]
fn skce_accepts_auto_calibrated_worlds() {
    let accepted = (0..100)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let world = random_world(3, 4, ModelRegime::TrueConditional, &mut rng).unwrap();
            !skce_rejects(&world, 60, 1_000 + seed)
        })
        .count();
    assert!(accepted >= 90, "accepted {accepted}/100");
}

#[test]
fn skce_rejects_overconfident_world() {
    let world = DiscreteWorld::new(
        vec![0.0],
        vec![-1.0, 0.0, 1.0],
        vec![1.0],
        vec![vec![0.5, 0.0, 0.5]],
        vec![EmpiricalDistribution::point_mass(0.0)],
    )
    .unwrap();
    let rejected = (0..100).filter(|&seed| skce_rejects(&world, 100, seed)).count();
    assert!(rejected >= 95, "rejected {rejected}/100");
}

#[test]
fn pit_of_perfect_forecasts_passes_ks() {
    let accepted = (0..100)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let preds: Vec<EmpiricalDistribution> = (0..200)
                .map(|_| {
                    let values = (0..120).map(|_| StandardNormal.sample(&mut rng)).collect();
                    EmpiricalDistribution::uniform(values).unwrap()
                })
                .collect();
            let ys: Vec<f64> = preds.iter().map(|q| q.sample_one(&mut rng)).collect();
            !ks_uniform_test(&pit_values(&preds, &ys).unwrap(), 0.05).unwrap().reject
        })
        .count();
    assert!(accepted >= 90, "accepted {accepted}/100");
}

#[test]
fn experiment_reports_are_reproducible() {
    let config = ExperimentConfig {
        run: RunConfig {
            seed: 7,
            n_null: 99,
            gaussian_grid_size: 32,
            ..RunConfig::default()
        },
        n: 400,
        skce_max_n: None,
        explicit_bandwidths: None,
    };
    let first = serde_json::to_string(&run_bimodal_experiment(&config).unwrap()).unwrap();
    let second = serde_json::to_string(&run_bimodal_experiment(&config).unwrap()).unwrap();
    assert_eq!(first, second);
}

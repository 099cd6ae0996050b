use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Dataset size used when none is given.
pub const DEFAULT_SYNTH_N: usize = 20_000;

/// Variance of each mixture component.
pub const SYNTH_NOISE_VAR: f64 = 1.0 / 100.0;

/// Draws `(x, y)` with `x ~ U[-1, 1]` and `y` from the equal-weight mixture
/// of `N(x + sin(3x/20), 0.01)` and `N(x - sin(3x/20), 0.01)`.
pub fn synth_bimodal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let noise = Normal::new(0.0, SYNTH_NOISE_VAR.sqrt()).expect("valid normal");
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let shift = (3.0 * x / 20.0).sin();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let y = x + sign * shift + noise.sample(rng);
            (x, y)
        })
        .collect()
}

/// Index sets of a train/calibration/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut 60/20/20.
pub fn split_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = n * 6 / 10;
    let n_cal = n * 2 / 10;
    let test = idx.split_off(n_train + n_cal);
    let cal = idx.split_off(n_train);
    Split { train: idx, cal, test }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn component_means_average_to_x() {
        for x in [-1.0, -0.3, 0.0, 0.5, 1.0f64] {
            let s = (3.0 * x / 20.0).sin();
            assert_eq!(((x + s) + (x - s)) / 2.0, x);
        }
    }

    #[test]
    fn residual_variance_matches_mixture_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = synth_bimodal(100_000, &mut rng);
        let n = data.len() as f64;
        let resid: Vec<f64> = data.iter().map(|(x, y)| y - x).collect();
        let mean = resid.iter().sum::<f64>() / n;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = data
            .iter()
            .map(|(x, _)| (3.0 * x / 20.0).sin().powi(2) + SYNTH_NOISE_VAR)
            .sum::<f64>()
            / n;
        assert!((var - want).abs() <= 0.1 * want, "{var} vs {want}");
        assert!(data.iter().all(|(x, _)| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn split_is_a_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = split_indices(1000, &mut rng);
        assert_eq!((s.train.len(), s.cal.len(), s.test.len()), (600, 200, 200));
        let mut all: Vec<usize> = s.train.iter().chain(&s.cal).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(s, split_indices(1000, &mut ChaCha8Rng::seed_from_u64(2)));
    }
}

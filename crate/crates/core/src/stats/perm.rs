use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{SeedStream, Sided, TestResult};

// Null draws within this distance of the observed value count as ties (extreme).
const TIE_EPSILON: f64 = 1e-12;

/// A permutation test result together with the null sample it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    pub result: TestResult,
    pub null: Vec<f64>,
}

/// Monte Carlo permutation test with add-one smoothing.
///
/// Iteration `i` draws from the stream `(seed, "perm", i)`, so the null sample
/// is identical however the iterations are scheduled across threads. The
/// p-value is `(1 + extreme) / (1 + iters)`. Two-sided extremity is measured
/// as absolute deviation from the null sample mean.
pub fn permutation_test<F>(
    observed: f64,
    resample: F,
    iters: usize,
    rng: &SeedStream,
    sided: Sided,
) -> PermutationOutcome
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let null: Vec<f64> = (0..iters)
        .into_par_iter()
        .map(|i| resample(&mut rng.stream("perm", i as u64)))
        .collect();
    let p_value = tail_probability(observed, &null, sided);
    PermutationOutcome {
        result: TestResult {
            statistic: observed,
            p_value,
            sided,
            n_resamples: iters,
        },
        null,
    }
}

fn tail_probability(observed: f64, null: &[f64], sided: Sided) -> f64 {
    let extreme = match sided {
        Sided::OneSidedGreater => null
            .iter()
            .filter(|&&x| x >= observed - TIE_EPSILON)
            .count(),
        Sided::OneSidedLess => null
            .iter()
            .filter(|&&x| x <= observed + TIE_EPSILON)
            .count(),
        Sided::TwoSided => {
            let center = if null.is_empty() {
                0.0
            } else {
                null.iter().sum::<f64>() / null.len() as f64
            };
            let dev = (observed - center).abs();
            null.iter()
                .filter(|&&x| (x - center).abs() >= dev - TIE_EPSILON)
                .count()
        }
    };
    (1 + extreme) as f64 / (1 + null.len()) as f64
}

//! The seeded, thread-count independent permutation test.
//!
//! ```text
//! cargo run --release --example permutation_engine
//! ```

use rand::seq::SliceRandom;
use uqkit::stats::{permutation_test, SeedStream, Sided};

fn mean_gap(values: &[f64], split: usize) -> f64 {
    let (a, b) = values.split_at(split);
    a.iter().sum::<f64>() / a.len() as f64 - b.iter().sum::<f64>() / b.len() as f64
}

fn main() {
    // Two groups whose means differ by 0.8.
    let group_a = [2.1, 2.5, 1.9, 2.8, 2.4, 2.2, 2.6, 2.0];
    let group_b = [1.6, 1.9, 1.2, 2.0, 1.5, 1.8, 1.4, 1.7];
    let pooled: Vec<f64> = group_a.iter().chain(&group_b).copied().collect();
    let observed = mean_gap(&pooled, group_a.len());

    let resample = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut shuffled = pooled.clone();
        shuffled.shuffle(rng);
        mean_gap(&shuffled, group_a.len())
    };
    let rng = SeedStream::new(42);
    let out = permutation_test(observed, resample, 5000, &rng, Sided::TwoSided);
    println!(
        "observed gap {observed:.3}, p = {:.5} from {} resamples",
        out.result.p_value, out.result.n_resamples
    );

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let again =
        single.install(|| permutation_test(observed, resample, 5000, &rng, Sided::TwoSided));
    println!(
        "same p-value on one thread: {}",
        again.result.p_value == out.result.p_value
    );
}

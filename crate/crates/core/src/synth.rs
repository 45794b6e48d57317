//! Deterministic synthetic datasets in the dump format.
//!
//! Real survey and benchmark data cannot be redistributed, so examples,
//! self-checks and tests run on these generators instead.

use std::collections::BTreeMap;

use rand::Rng;

use crate::ingest::{DumpRecord, DumpToken, FORMAT_VERSION};
use crate::record::{argmax, label};
use crate::stats::SeedStream;

const FILLER_TOKENS: u64 = 100;
const FILLER_MASS: f64 = 0.08;
const TAIL_MASS: f64 = 0.02;
const TAIL_COUNT: u64 = 50_000;
const LABEL_MASS: f64 = 1.0 - FILLER_MASS - TAIL_MASS;

pub const SUBJECTS: [&str; 4] = ["algebra", "biology", "history", "law"];

/// A dump record whose token distribution holds the label tokens (ids `0..n`)
/// carrying `LABEL_MASS` in proportion to `choice_weights`, 100 filler tokens
/// with harmonic decay and a uniform tail.
pub fn record_from_choice_weights(
    question_id: &str,
    dataset_id: &str,
    choice_weights: &[f64],
) -> DumpRecord {
    let total: f64 = choice_weights.iter().sum();
    let label_probs: Vec<f64> = choice_weights
        .iter()
        .map(|w| LABEL_MASS * w / total)
        .collect();
    let mut top_tokens: Vec<DumpToken> = label_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| DumpToken {
            text: format!(" {}", label(i)),
            id: i as u64,
            prob: p,
        })
        .collect();
    let harmonic: f64 = (1..=FILLER_TOKENS).map(|j| 1.0 / j as f64).sum();
    top_tokens.extend((1..=FILLER_TOKENS).map(|j| DumpToken {
        text: format!("tok{j}"),
        id: 1000 + j,
        prob: FILLER_MASS / (j as f64 * harmonic),
    }));
    top_tokens.sort_by(|a, b| b.prob.total_cmp(&a.prob).then(a.id.cmp(&b.id)));
    let choice_probs: BTreeMap<String, f64> = label_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (label(i), p))
        .collect();
    DumpRecord {
        format_version: FORMAT_VERSION.to_string(),
        question_id: question_id.to_string(),
        model_id: "synthetic".to_string(),
        dataset_id: dataset_id.to_string(),
        top_tokens,
        tail_mass: TAIL_MASS,
        tail_count: TAIL_COUNT,
        exact_total_entropy: None,
        chosen_label: label(argmax(&label_probs).expect("non-empty")),
        choice_probs,
        correct_label: None,
        subject: None,
        human_ratios: None,
        choice_count: choice_weights.len(),
        choice_permutation: None,
    }
}

/// Four-label benchmark where the model is right with probability
/// `accuracy_high` on the confident half and `accuracy_low` on the rest.
///
/// Confident questions put most label mass on the chosen answer, the others
/// spread it, so every entropy-style measure separates the halves. Wrong
/// answers land on the first label that is not the correct one, mimicking a
/// position bias; correct answers are uniform over labels.
pub fn calibrated_dataset(
    n: usize,
    accuracy_high: f64,
    accuracy_low: f64,
    seed: u64,
) -> Vec<DumpRecord> {
    let mut rng = SeedStream::new(seed).stream("synth/calibrated", 0);
    (0..n)
        .map(|i| {
            let confident = i < n / 2;
            let accuracy = if confident {
                accuracy_high
            } else {
                accuracy_low
            };
            let correct = rng.random_range(0..4usize);
            let chosen = if rng.random_bool(accuracy) {
                correct
            } else if correct == 0 {
                1
            } else {
                0
            };
            let jitter: f64 = rng.random_range(0.0..0.05);
            let (top, rest) = if confident {
                (0.85 - jitter, 0.05 + jitter / 3.0)
            } else {
                (0.40 - jitter, 0.20 + jitter / 3.0)
            };
            let weights: Vec<f64> = (0..4)
                .map(|j| if j == chosen { top } else { rest })
                .collect();
            let mut record =
                record_from_choice_weights(&format!("cal-{i:04}"), "synthetic-benchmark", &weights);
            record.correct_label = Some(label(correct));
            record.subject = Some(SUBJECTS[i % SUBJECTS.len()].to_string());
            record
        })
        .collect()
}

/// Survey-style dataset with 2 to 5 choices. Human responses are noisy
/// versions of the model's label distribution, so uncertainty measures are
/// correlated with human entropy without being identical to it.
pub fn alignment_dataset(n: usize, seed: u64) -> Vec<DumpRecord> {
    let mut rng = SeedStream::new(seed).stream("synth/alignment", 0);
    (0..n)
        .map(|i| {
            let k = rng.random_range(2..=5usize);
            let concentration: f64 = rng.random_range(0.5..6.0);
            let weights: Vec<f64> = (0..k)
                .map(|_| rng.random_range(0.05..1.0f64).powf(concentration))
                .collect();
            let mut record =
                record_from_choice_weights(&format!("srv-{i:04}"), "synthetic-survey", &weights);
            let human: Vec<f64> = weights
                .iter()
                .map(|w| w * rng.random_range(0.6..1.4))
                .collect();
            let total: f64 = human.iter().sum();
            record.human_ratios = Some(human.iter().map(|h| h / total).collect());
            record
        })
        .collect()
}

/// Like [`alignment_dataset`] but human ratios equal the renormalized label
/// probabilities, so choice entropy reproduces human entropy exactly.
pub fn mirrored_alignment_dataset(n: usize, seed: u64) -> Vec<DumpRecord> {
    let mut records = alignment_dataset(n, seed);
    for r in &mut records {
        let probs = r.choice_vector();
        let total: f64 = probs.iter().sum();
        r.human_ratios = Some(probs.iter().map(|p| p / total).collect());
        r.dataset_id = "synthetic-survey-mirrored".to_string();
    }
    records
}

//! Every uncertainty measure for one truncated next-token distribution.
//!
//! ```text
//! cargo run --example entropy_measures
//! ```

use uqkit::dist::{TokenDistribution, TokenProb};
use uqkit::measures::{compute_measures_partial, total_entropy, MeasureConfig};
use uqkit::record::QuestionRecord;

fn main() -> uqkit::Result<()> {
    // Label tokens A-D are ids 0-3; a few other tokens follow, the rest of
    // the vocabulary shares the tail.
    let entries = vec![
        TokenProb::new(0, 0.46),
        TokenProb::new(1, 0.21),
        TokenProb::new(2, 0.12),
        TokenProb::new(3, 0.07),
        TokenProb::new(500, 0.05),
        TokenProb::new(501, 0.03),
    ];
    let dist = TokenDistribution::new(entries, 0.06, 32_000, None)?;
    println!(
        "listed mass {:.2}, tail over {} tokens",
        dist.listed_mass(),
        dist.tail_count()
    );
    println!(
        "total entropy (uniform tail): {:.4} nats",
        total_entropy(&dist)
    );

    let record = QuestionRecord::new("demo", dist, vec![0.46, 0.21, 0.12, 0.07])?;
    let cfg = MeasureConfig {
        k_values: vec![2, 4, 6, 10],
        ..MeasureConfig::default()
    };
    let (vector, missing) = compute_measures_partial(&record, &cfg)?;
    for id in cfg.measure_ids() {
        match vector.get(id) {
            Some(v) => println!("{:<24} {v:.4}", id.to_string()),
            None => println!("{:<24} n/a", id.to_string()),
        }
    }
    // Only six tokens are listed, so k=10 and p=0.95 cannot be computed.
    for e in missing {
        println!("skipped: {e}");
    }
    Ok(())
}

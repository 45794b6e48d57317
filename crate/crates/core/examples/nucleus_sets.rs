//! Top-k and top-p subsets, and how the two nucleus conventions differ.
//!
//! ```text
//! cargo run --example nucleus_sets
//! ```

use uqkit::dist::{top_k_subset, top_p_set, NucleusMode, TokenDistribution};

fn main() -> uqkit::Result<()> {
    let dist = TokenDistribution::from_probs(&[0.4, 0.3, 0.2, 0.1])?;

    let top2 = top_k_subset(&dist, 2)?;
    println!("top-2 renormalized: {:?}", top2.probs());

    for p in [0.5, 0.7, 0.9] {
        let standard = top_p_set(&dist, p, NucleusMode::Standard)?;
        let strict = top_p_set(&dist, p, NucleusMode::Strict)?;
        println!(
            "p={p}: standard keeps {} tokens, strict keeps {}",
            standard.source_size(),
            strict.source_size()
        );
    }

    match top_k_subset(&dist, 10) {
        Err(e) => println!("k larger than the listed set: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

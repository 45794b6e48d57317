//! Jensen-Shannon distance and its metric properties.
//!
//! ```text
//! cargo run --example jsd_metric
//! ```

use uqkit::stats::jsd;

fn main() -> uqkit::Result<()> {
    let p = [0.75, 0.25];
    let q = [0.25, 0.75];
    let r = [0.5, 0.5];
    println!("d(p, q) = {:.6}", jsd(&p, &q)?);
    println!("d(q, p) = {:.6}", jsd(&q, &p)?);
    println!("d(p, r) + d(r, q) = {:.6}", jsd(&p, &r)? + jsd(&r, &q)?);
    println!("d(p, p) = {}", jsd(&p, &p)?);
    println!(
        "disjoint supports: {:.9} (sqrt ln 2 = {:.9})",
        jsd(&[1.0, 0.0], &[0.0, 1.0])?,
        2f64.ln().sqrt()
    );
    Ok(())
}

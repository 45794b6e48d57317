//! The line-delimited dump format shared with the extractor.
//!
//! ```text
//! cargo run --example dump_roundtrip
//! ```

use std::collections::BTreeMap;

use uqkit::ingest::{parse_dump, write_dump, DumpHeader, FORMAT_VERSION};
use uqkit::synth::record_from_choice_weights;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let header = DumpHeader {
        format_version: FORMAT_VERSION.to_string(),
        label_token_convention: Some("leading-space capital letter".into()),
        extra: BTreeMap::new(),
    };
    let mut record = record_from_choice_weights("q-001", "demo", &[3.0, 1.0, 1.0]);
    record.correct_label = Some("A".into());
    record.choice_permutation = Some(vec![1, 2, 0]);

    let mut buf = Vec::new();
    write_dump(&mut buf, Some(&header), std::slice::from_ref(&record))?;
    let text = String::from_utf8(buf)?;
    println!(
        "{} bytes, first line: {}",
        text.len(),
        text.lines().next().unwrap_or_default()
    );

    let parsed = parse_dump(text.as_bytes(), false)?;
    assert_eq!(parsed.records, vec![record]);
    println!("round trip exact: {} record(s)", parsed.records.len());

    // Lenient mode skips bad lines and reports them with line numbers.
    let broken = format!("{text}{{\"question_id\": 7}}\n");
    let lenient = parse_dump(broken.as_bytes(), true)?;
    for e in &lenient.skipped {
        println!("skipped: {e}");
    }
    Ok(())
}

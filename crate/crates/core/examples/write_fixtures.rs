//! Regenerates the synthetic dump fixtures.
//!
//! ```text
//! cargo run --example write_fixtures -- [output dir]
//! ```
//!
//! Defaults to the crate's `fixtures/` directory. Output is deterministic.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;
use uqkit::ingest::{write_dump, DumpHeader, DumpRecord, FORMAT_VERSION};
use uqkit::stats::SeedStream;
use uqkit::synth;

fn header(generator: &str, seed: u64) -> DumpHeader {
    DumpHeader {
        format_version: FORMAT_VERSION.to_string(),
        label_token_convention: Some("leading-space capital letter".to_string()),
        extra: BTreeMap::from([
            ("generator".to_string(), json!(generator)),
            ("seed".to_string(), json!(seed)),
        ]),
    }
}

fn write(
    dir: &Path,
    name: &str,
    header: &DumpHeader,
    records: &[DumpRecord],
) -> Result<(), Box<dyn std::error::Error>> {
    let path = dir.join(name);
    write_dump(BufWriter::new(File::create(&path)?), Some(header), records)?;
    println!("wrote {} ({} records)", path.display(), records.len());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    let seed = SeedStream::DEFAULT_SEED;
    write(
        &dir,
        "calibrated_400.jsonl",
        &header("calibrated_dataset(400, 0.9, 0.3)", seed),
        &synth::calibrated_dataset(400, 0.9, 0.3, seed),
    )?;
    write(
        &dir,
        "alignment_mirrored_120.jsonl",
        &header("mirrored_alignment_dataset(120)", seed),
        &synth::mirrored_alignment_dataset(120, seed),
    )?;
    Ok(())
}

//! Calibration analysis: correctness correlations and the JSD shift test.
//!
//! ```text
//! cargo run --release --example calibration_shift
//! ```

use uqkit::calibration::{calibration_report, CalibConfig};
use uqkit::measures::{compute_measures_partial, MeasureConfig, MeasureId};
use uqkit::record::QuestionRecord;
use uqkit::stats::SeedStream;
use uqkit::synth::calibrated_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Right 90% of the time on the confident half, 30% on the rest.
    let records: Vec<QuestionRecord> = calibrated_dataset(400, 0.9, 0.3, 3)
        .iter()
        .map(|d| d.to_question_record())
        .collect::<Result<_, _>>()?;
    let cfg = MeasureConfig::default();
    let vectors: Vec<_> = records
        .iter()
        .map(|r| compute_measures_partial(r, &cfg).map(|(v, _)| v))
        .collect::<Result<_, _>>()?;
    let measures = [
        MeasureId::Top1Prob,
        MeasureId::ChoiceEntropy,
        MeasureId::TopKEntropy(10),
        MeasureId::TopPEntropy(0.9),
    ];
    let report = calibration_report(
        &records,
        &vectors,
        &measures,
        true,
        &CalibConfig::default(),
        &SeedStream::default(),
    )?;

    println!("Spearman(measure, correct) by subject:");
    for (subject, row) in report
        .correlation
        .subjects
        .iter()
        .zip(&report.correlation.rho)
    {
        let cells: Vec<String> = row
            .iter()
            .map(|r| r.map_or("  n/a".into(), |r| format!("{r:+.2}")))
            .collect();
        println!("  {subject:<8} {}", cells.join(" "));
    }
    println!("JSD shift (negative = calibrated):");
    for s in &report.shifts {
        println!(
            "  {:<22} shift {:+.4}  p {:.4}  high/low {}/{}",
            s.measure,
            s.shift.unwrap_or(f64::NAN),
            s.p_value.unwrap_or(f64::NAN),
            s.high_size,
            s.low_size
        );
    }
    Ok(())
}

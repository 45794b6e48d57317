//! Alignment between model uncertainty and human survey responses.
//!
//! ```text
//! cargo run --example human_alignment
//! ```

use uqkit::alignment::{alignment_report, top_performing, AlignConfig, CorrelationKind};
use uqkit::measures::{compute_measures_partial, MeasureConfig};
use uqkit::record::QuestionRecord;
use uqkit::synth::alignment_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records: Vec<QuestionRecord> = alignment_dataset(300, 11)
        .iter()
        .map(|d| d.to_question_record())
        .collect::<Result<_, _>>()?;
    let cfg = MeasureConfig::default();
    let vectors: Vec<_> = records
        .iter()
        .map(|r| compute_measures_partial(r, &cfg).map(|(v, _)| v))
        .collect::<Result<_, _>>()?;

    let mut reports = Vec::new();
    for kind in [CorrelationKind::Pearson, CorrelationKind::Spearman] {
        let align = AlignConfig {
            correlation: kind,
            ..AlignConfig::new(cfg.measure_ids())
        };
        reports.push(alignment_report(&records, &vectors, &align)?);
    }
    let report = &reports[0];
    let a = &report.agreement;
    println!(
        "top answer agreement {}/{} = {:.3} (chance {:.3}, z = {:.2}, p = {:.2e})",
        a.agreements, a.n_questions, a.rate, a.random_chance, a.z_test.statistic, a.z_test.p_value
    );
    println!(
        "Kendall distance mean {:.3} sd {:.3} over {} questions",
        report.kendall_mean.unwrap_or(f64::NAN),
        report.kendall_std.unwrap_or(f64::NAN),
        report.kendall_n
    );
    println!("{:<24} {:>9} {:>9}", "measure", "pearson", "spearman");
    for (p, s) in report.by_measure.iter().zip(&reports[1].by_measure) {
        let show = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{r:.3}"));
        println!("{:<24} {:>9} {:>9}", p.measure, show(p.r), show(s.r));
    }
    let refs: Vec<_> = reports.iter().collect();
    println!(
        "|r| >= 0.3 under both correlations: {:?}",
        top_performing(&refs, 0.3)
    );
    Ok(())
}

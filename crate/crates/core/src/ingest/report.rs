//! Report and plot-data emission.
//!
//! Every file starts with a header recording the tool version, format
//! version, seed and configuration, so a run can be repeated exactly. Floats
//! are written with 6 significant digits; missing cells are empty in CSV and
//! `null` in JSON. Output depends only on its inputs, never on timing or
//! thread count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Number, Value};

use super::{IngestError, FORMAT_VERSION};
use crate::alignment::AlignmentReport;
use crate::calibration::CalibrationReport;
use crate::measures::{MeasureId, MeasureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// How permutation null samples are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramMode {
    /// One row per permutation iteration.
    Raw,
    /// Equal-width bins spanning the sample range.
    Binned(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputHeader {
    pub tool: String,
    pub tool_version: String,
    pub format_version: String,
    pub seed: u64,
    pub command: String,
    /// Ordered configuration echo.
    pub config: Vec<(String, String)>,
}

impl OutputHeader {
    pub fn new(command: &str, seed: u64, config: Vec<(String, String)>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION.to_string(),
            seed,
            command: command.to_string(),
            config,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("tool: {} {}", self.tool, self.tool_version),
            format!("format_version: {}", self.format_version),
            format!("seed: {}", self.seed),
            format!("command: {}", self.command),
        ];
        lines.extend(self.config.iter().map(|(k, v)| format!("config.{k}: {v}")));
        lines
    }

    pub fn to_json(&self) -> Value {
        let config: serde_json::Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        json!({
            "tool": self.tool,
            "tool_version": self.tool_version,
            "format_version": self.format_version,
            "seed": self.seed,
            "command": self.command,
            "config": config,
        })
    }
}

/// Formats like C's `%.6g`.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

/// Rounds every non-integer number in a JSON tree to 6 significant digits.
pub fn round_json_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let rounded: f64 = fmt_sig6(x).parse().unwrap_or(x);
            if let Some(num) = Number::from_f64(rounded) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json_floats),
        Value::Object(map) => map.values_mut().for_each(round_json_floats),
        _ => {}
    }
}

fn write_json(
    path: &Path,
    header: &OutputHeader,
    key: &str,
    body: Value,
) -> Result<(), IngestError> {
    let mut body = body;
    round_json_floats(&mut body);
    let doc = json!({ "header": header.to_json(), key: body });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(
    path: &Path,
    header: &OutputHeader,
    columns: &[String],
    rows: &[Vec<String>],
) -> Result<(), IngestError> {
    let mut buf = Vec::new();
    for line in header.lines() {
        writeln!(buf, "# {line}")?;
    }
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        wtr.write_record(columns)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Something that can be written to an output directory.
pub trait Emit {
    fn emit(
        &self,
        header: &OutputHeader,
        dir: &Path,
        format: ReportFormat,
        histogram: HistogramMode,
    ) -> Result<Vec<PathBuf>, IngestError>;
}

/// Writes `report` into `dir` in the given format and returns the files written.
pub fn emit_report<R: Emit + ?Sized>(
    report: &R,
    header: &OutputHeader,
    dir: &Path,
    format: ReportFormat,
    histogram: HistogramMode,
) -> Result<Vec<PathBuf>, IngestError> {
    fs::create_dir_all(dir)?;
    report.emit(header, dir, format, histogram)
}

impl Emit for AlignmentReport {
    fn emit(
        &self,
        header: &OutputHeader,
        dir: &Path,
        format: ReportFormat,
        _histogram: HistogramMode,
    ) -> Result<Vec<PathBuf>, IngestError> {
        match format {
            ReportFormat::Json => {
                let path = dir.join("alignment.json");
                write_json(&path, header, "alignment", serde_json::to_value(self)?)?;
                Ok(vec![path])
            }
            ReportFormat::Csv => {
                let summary = dir.join("alignment_summary.csv");
                let a = &self.agreement;
                let rows = vec![
                    vec!["n_questions".into(), self.n_questions.to_string()],
                    vec!["agreements".into(), a.agreements.to_string()],
                    vec!["agreement_rate".into(), fmt_sig6(a.rate)],
                    vec!["random_chance".into(), fmt_sig6(a.random_chance)],
                    vec!["z".into(), fmt_sig6(a.z_test.statistic)],
                    vec!["z_p_value".into(), fmt_sig6(a.z_test.p_value)],
                    vec!["z_sided".into(), a.z_test.sided.as_str().into()],
                    vec![
                        "tied_plurality_questions".into(),
                        a.tied_plurality_questions.to_string(),
                    ],
                    vec!["kendall_mean".into(), opt(self.kendall_mean)],
                    vec!["kendall_std".into(), opt(self.kendall_std)],
                    vec!["kendall_n".into(), self.kendall_n.to_string()],
                ];
                write_csv(&summary, header, &strings(&["key", "value"]), &rows)?;

                let measures = dir.join("alignment_measures.csv");
                let rows: Vec<Vec<String>> = self
                    .by_measure
                    .iter()
                    .map(|m| {
                        vec![
                            m.measure.clone(),
                            opt(m.r),
                            m.n.to_string(),
                            m.above_threshold.to_string(),
                        ]
                    })
                    .collect();
                let r_col = match self.correlation {
                    crate::alignment::CorrelationKind::Pearson => "pearson_r",
                    crate::alignment::CorrelationKind::Spearman => "spearman_r",
                };
                let threshold_col = format!("abs_r_ge_{}", fmt_sig6(self.significance_threshold));
                let cols = vec![
                    "measure".to_string(),
                    r_col.to_string(),
                    "n".to_string(),
                    threshold_col,
                ];
                write_csv(&measures, header, &cols, &rows)?;
                Ok(vec![summary, measures])
            }
        }
    }
}

/// Rows of `(lower, upper, count)` over equal-width bins.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, values.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let upper = if i + 1 == bins {
                hi
            } else {
                lo + width * (i + 1) as f64
            };
            (lo + width * i as f64, upper, c)
        })
        .collect()
}

impl Emit for CalibrationReport {
    fn emit(
        &self,
        header: &OutputHeader,
        dir: &Path,
        format: ReportFormat,
        histogram_mode: HistogramMode,
    ) -> Result<Vec<PathBuf>, IngestError> {
        let mut written = Vec::new();
        match format {
            ReportFormat::Json => {
                let path = dir.join("calibration.json");
                write_json(&path, header, "calibration", serde_json::to_value(self)?)?;
                written.push(path);
            }
            ReportFormat::Csv => {
                let path = dir.join("calibration_spearman.csv");
                let mut cols = vec!["subject".to_string()];
                cols.extend(self.correlation.measures.iter().cloned());
                let rows: Vec<Vec<String>> = self
                    .correlation
                    .subjects
                    .iter()
                    .zip(&self.correlation.rho)
                    .map(|(s, row)| {
                        let mut out = vec![s.clone()];
                        out.extend(row.iter().map(|&r| opt(r)));
                        out
                    })
                    .collect();
                write_csv(&path, header, &cols, &rows)?;
                written.push(path);

                let path = dir.join("calibration_shift.csv");
                let cols = strings(&[
                    "measure",
                    "jsd_shift",
                    "p_value",
                    "high_size",
                    "low_size",
                    "sided",
                    "n_resamples",
                ]);
                let rows: Vec<Vec<String>> = self
                    .shifts
                    .iter()
                    .map(|s| {
                        vec![
                            s.measure.clone(),
                            opt(s.shift),
                            opt(s.p_value),
                            s.high_size.to_string(),
                            s.low_size.to_string(),
                            s.sided.as_str().to_string(),
                            s.n_resamples.to_string(),
                        ]
                    })
                    .collect();
                write_csv(&path, header, &cols, &rows)?;
                written.push(path);

                let null_dir = dir.join("null");
                fs::create_dir_all(&null_dir)?;
                for s in self.shifts.iter().filter(|s| !s.null.is_empty()) {
                    let path = null_dir.join(format!("{}.csv", s.measure));
                    match histogram_mode {
                        HistogramMode::Raw => {
                            let rows: Vec<Vec<String>> = s
                                .null
                                .iter()
                                .enumerate()
                                .map(|(i, v)| vec![i.to_string(), fmt_sig6(*v)])
                                .collect();
                            write_csv(&path, header, &strings(&["iteration", "jsd_shift"]), &rows)?;
                        }
                        HistogramMode::Binned(bins) => {
                            let rows: Vec<Vec<String>> = histogram(&s.null, bins)
                                .into_iter()
                                .map(|(lo, hi, c)| vec![fmt_sig6(lo), fmt_sig6(hi), c.to_string()])
                                .collect();
                            write_csv(
                                &path,
                                header,
                                &strings(&["bin_lower", "bin_upper", "count"]),
                                &rows,
                            )?;
                        }
                    }
                    written.push(path);
                }
            }
        }
        Ok(written)
    }
}

/// Per-question measure table: `measures.jsonl` or `measures.csv`.
pub struct MeasureTable<'a> {
    pub measures: &'a [MeasureId],
    pub vectors: &'a [MeasureVector],
}

impl Emit for MeasureTable<'_> {
    fn emit(
        &self,
        header: &OutputHeader,
        dir: &Path,
        format: ReportFormat,
        _histogram: HistogramMode,
    ) -> Result<Vec<PathBuf>, IngestError> {
        match format {
            ReportFormat::Json => {
                let path = dir.join("measures.jsonl");
                let mut buf = Vec::new();
                serde_json::to_writer(&mut buf, &json!({ "header": header.to_json() }))?;
                buf.push(b'\n');
                for v in self.vectors {
                    let mut value = serde_json::to_value(v)?;
                    round_json_floats(&mut value);
                    serde_json::to_writer(&mut buf, &value)?;
                    buf.push(b'\n');
                }
                fs::write(&path, buf)?;
                Ok(vec![path])
            }
            ReportFormat::Csv => {
                let path = dir.join("measures.csv");
                let mut cols = vec!["question_id".to_string()];
                cols.extend(self.measures.iter().map(|m| m.to_string()));
                let rows: Vec<Vec<String>> = self
                    .vectors
                    .iter()
                    .map(|v| {
                        let mut row = vec![v.question_id.clone()];
                        row.extend(self.measures.iter().map(|&m| opt(v.get(m))));
                        row
                    })
                    .collect();
                write_csv(&path, header, &cols, &rows)?;
                Ok(vec![path])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{CorrelationMatrix, MeasureShift};
    use crate::stats::Sided;

    #[test]
    fn sig6_formatting() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(1.0), "1");
        assert_eq!(fmt_sig6(0.1234567), "0.123457");
        assert_eq!(fmt_sig6(-1.224744871), "-1.22474");
        assert_eq!(fmt_sig6(123456.7), "123457");
        assert_eq!(fmt_sig6(1234567.0), "1.23457e+06");
        assert_eq!(fmt_sig6(0.0000123456), "1.23456e-05");
        assert_eq!(fmt_sig6(0.000999000999), "0.000999001");
        assert_eq!(fmt_sig6(9.9999996), "10");
    }

    #[test]
    fn json_floats_are_rounded() {
        let mut v = json!({"a": 0.1234567, "b": [1, 2.000000001], "c": null});
        round_json_floats(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.123457,"b":[1,2.0],"c":null}"#);
    }

    #[test]
    fn histogram_counts_everything() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram(&values, 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
        assert_eq!(histogram(&[0.5, 0.5], 10), vec![(0.5, 0.5, 2)]);
    }

    fn report() -> CalibrationReport {
        CalibrationReport {
            n_questions: 4,
            n_labels: 4,
            correlation: CorrelationMatrix {
                subjects: vec!["all".into()],
                measures: vec!["choice_entropy".into(), "total_entropy".into()],
                rho: vec![vec![Some(-0.5), None]],
            },
            shifts: vec![MeasureShift {
                measure: "choice_entropy".into(),
                shift: Some(-0.0123456789),
                p_value: Some(1.0 / 1001.0),
                high_size: 2,
                low_size: 2,
                sided: Sided::TwoSided,
                n_resamples: 3,
                parts: None,
                null: vec![0.01, -0.02, 0.0],
            }],
        }
    }

    #[test]
    fn calibration_csv_is_deterministic_with_empty_null_cell() {
        let header = OutputHeader::new("calibrate", 7, vec![("iters".into(), "3".into())]);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = emit_report(
            &report(),
            &header,
            a.path(),
            ReportFormat::Csv,
            HistogramMode::Raw,
        )
        .unwrap();
        let fb = emit_report(
            &report(),
            &header,
            b.path(),
            ReportFormat::Csv,
            HistogramMode::Raw,
        )
        .unwrap();
        assert_eq!(fa.len(), 3);
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let spearman = fs::read_to_string(&fa[0]).unwrap();
        assert!(spearman.starts_with("# tool: uqkit"));
        assert!(spearman.contains("# seed: 7\n"));
        assert!(spearman.ends_with("all,-0.5,\n"));
        let shift = fs::read_to_string(&fa[1]).unwrap();
        assert!(shift.contains("choice_entropy,-0.0123457,0.000999001,2,2,two_sided,3"));
        let null = fs::read_to_string(&fa[2]).unwrap();
        assert_eq!(null.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
    }

    #[test]
    fn calibration_json_uses_null() {
        let header = OutputHeader::new("calibrate", 7, vec![]);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(
            &report(),
            &header,
            dir.path(),
            ReportFormat::Json,
            HistogramMode::Raw,
        )
        .unwrap();
        let doc: Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(doc["header"]["seed"], 7);
        assert_eq!(doc["calibration"]["correlation"]["rho"][0][1], Value::Null);
        assert_eq!(doc["calibration"]["shifts"][0]["shift"], json!(-0.0123457));
    }
}

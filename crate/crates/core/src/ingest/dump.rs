//! Line-delimited token dumps.
//!
//! One JSON object per line, one question per object. An optional first line
//! of the form `{"header": {...}}` carries producer metadata such as the
//! label-token convention. Every record states `"format_version": "1"`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::IngestError;
use crate::dist::{TokenDistribution, TokenProb, MASS_TOLERANCE};
use crate::record::{argmax, label, label_index, QuestionRecord, MAX_CHOICES};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpToken {
    pub text: String,
    pub id: u64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpRecord {
    pub format_version: String,
    pub question_id: String,
    pub model_id: String,
    pub dataset_id: String,
    pub top_tokens: Vec<DumpToken>,
    pub tail_mass: f64,
    pub tail_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_total_entropy: Option<f64>,
    /// Raw probability of each label token, keyed `"A"`, `"B"`, ...
    pub choice_probs: BTreeMap<String, f64>,
    pub chosen_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_ratios: Option<Vec<f64>>,
    pub choice_count: usize,
    /// Original choice index shown at each label position, when choices were shuffled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_permutation: Option<Vec<usize>>,
}

/// Producer metadata from the optional header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub format_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_token_convention: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl DumpRecord {
    /// Label-ordered choice probabilities.
    pub fn choice_vector(&self) -> Vec<f64> {
        (0..self.choice_count)
            .map(|i| self.choice_probs.get(&label(i)).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn distribution(&self) -> crate::Result<TokenDistribution> {
        TokenDistribution::new(
            self.top_tokens
                .iter()
                .map(|t| TokenProb::new(t.id, t.prob))
                .collect(),
            self.tail_mass,
            self.tail_count,
            self.exact_total_entropy,
        )
    }

    /// Checks every record invariant, returning a description of the first breach.
    pub fn validate(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {:?}, expected {FORMAT_VERSION:?}",
                self.format_version
            ));
        }
        let n = self.choice_count;
        if !(2..=MAX_CHOICES).contains(&n) {
            return Err(format!("choice_count {n} outside 2..={MAX_CHOICES}"));
        }
        let expected: Vec<String> = (0..n).map(label).collect();
        if !self.choice_probs.keys().eq(expected.iter()) {
            return Err(format!(
                "choice_probs keys {:?} are not exactly {:?}",
                self.choice_probs.keys().collect::<Vec<_>>(),
                expected
            ));
        }
        let probs = self.choice_vector();
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(format!("choice probability {p} outside [0, 1]"));
        }
        if probs.iter().sum::<f64>() <= 0.0 {
            return Err("choice_probs sum to zero".into());
        }
        let best = label(argmax(&probs).expect("n >= 2"));
        if self.chosen_label != best {
            return Err(format!(
                "chosen_label {:?} is not the argmax label {best:?}",
                self.chosen_label
            ));
        }
        if let Some(c) = &self.correct_label {
            if !label_index(c).is_some_and(|i| i < n) {
                return Err(format!("correct_label {c:?} is not one of {expected:?}"));
            }
        }
        if let Some(ratios) = &self.human_ratios {
            if ratios.len() != n {
                return Err(format!("{} human_ratios for {n} choices", ratios.len()));
            }
            if let Some(r) = ratios.iter().find(|r| r.is_nan() || **r < 0.0) {
                return Err(format!("negative human ratio {r}"));
            }
            let total: f64 = ratios.iter().sum();
            if (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(format!("human_ratios sum to {total}, expected 1"));
            }
        }
        if let Some(perm) = &self.choice_permutation {
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return Err(format!(
                    "choice_permutation {perm:?} is not a permutation of 0..{n}"
                ));
            }
        }
        self.distribution().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn to_question_record(&self) -> crate::Result<QuestionRecord> {
        let mut record = QuestionRecord::new(
            self.question_id.clone(),
            self.distribution()?,
            self.choice_vector(),
        )?;
        record.correct = self.correct_label.as_deref().and_then(label_index);
        record.subject = self.subject.clone();
        record.human_ratios = self.human_ratios.clone();
        Ok(record)
    }
}

#[derive(Debug, Default)]
pub struct DumpFile {
    pub header: Option<DumpHeader>,
    pub records: Vec<DumpRecord>,
    /// Lines rejected in lenient mode.
    pub skipped: Vec<IngestError>,
}

impl DumpFile {
    pub fn question_records(&self) -> crate::Result<Vec<QuestionRecord>> {
        self.records
            .iter()
            .map(DumpRecord::to_question_record)
            .collect()
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<DumpRecord, IngestError> {
    let record: DumpRecord = serde_json::from_str(line).map_err(|e| IngestError::Schema {
        line: line_no,
        message: e.to_string(),
    })?;
    record
        .validate()
        .map_err(|message| IngestError::Validation {
            line: line_no,
            message,
        })?;
    Ok(record)
}

fn parse_header(line: &str) -> Option<Result<DumpHeader, serde_json::Error>> {
    let value: Value = serde_json::from_str(line).ok()?;
    let obj = value.as_object()?;
    if obj.len() != 1 {
        return None;
    }
    let header = obj.get("header")?;
    Some(serde_json::from_value(header.clone()))
}

/// Reads a dump. Errors carry 1-based line numbers.
///
/// With `lenient`, bad lines are logged and collected in [`DumpFile::skipped`]
/// instead of aborting the read.
pub fn parse_dump<R: BufRead>(reader: R, lenient: bool) -> Result<DumpFile, IngestError> {
    let mut file = DumpFile::default();
    let mut seen_content = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Some(header) = parse_header(trimmed) {
                file.header = Some(header.map_err(|e| IngestError::Schema {
                    line: line_no,
                    message: format!("bad header: {e}"),
                })?);
                continue;
            }
        }
        match parse_line(trimmed, line_no) {
            Ok(record) => file.records.push(record),
            Err(e) if lenient => {
                log::warn!("skipping {e}");
                file.skipped.push(e);
            }
            Err(e) => return Err(e),
        }
    }
    if file.records.is_empty() {
        log::warn!("dump contains no records");
    }
    Ok(file)
}

pub fn write_dump<W: Write>(
    mut writer: W,
    header: Option<&DumpHeader>,
    records: &[DumpRecord],
) -> Result<(), IngestError> {
    if let Some(h) = header {
        serde_json::to_writer(&mut writer, &serde_json::json!({ "header": h }))?;
        writer.write_all(b"\n")?;
    }
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DumpRecord {
        DumpRecord {
            format_version: "1".into(),
            question_id: "q1".into(),
            model_id: "m".into(),
            dataset_id: "d".into(),
            top_tokens: vec![
                DumpToken {
                    text: " A".into(),
                    id: 10,
                    prob: 0.5,
                },
                DumpToken {
                    text: " B".into(),
                    id: 11,
                    prob: 0.3,
                },
            ],
            tail_mass: 0.2,
            tail_count: 10,
            exact_total_entropy: None,
            choice_probs: [("A".to_string(), 0.5), ("B".to_string(), 0.3)]
                .into_iter()
                .collect(),
            chosen_label: "A".into(),
            correct_label: Some("B".into()),
            subject: None,
            human_ratios: Some(vec![0.4, 0.6]),
            choice_count: 2,
            choice_permutation: None,
        }
    }

    fn line(r: &DumpRecord) -> String {
        serde_json::to_string(r).unwrap()
    }

    #[test]
    fn valid_record_parses() {
        let file = parse_dump(line(&sample()).as_bytes(), false).unwrap();
        assert_eq!(file.records, vec![sample()]);
        let q = file.question_records().unwrap();
        assert_eq!(q[0].chosen, 0);
        assert_eq!(q[0].correct, Some(1));
    }

    #[test]
    fn zero_choice_mass_is_line_tagged() {
        let mut r = sample();
        r.choice_probs.insert("A".into(), 0.0);
        r.choice_probs.insert("B".into(), 0.0);
        let text = format!("{}\n{}\n", line(&sample()), line(&r));
        let err = parse_dump(text.as_bytes(), false).unwrap_err();
        assert!(
            matches!(err, IngestError::Validation { line: 2, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn unknown_and_missing_fields_are_schema_errors() {
        let mut v: Value = serde_json::to_value(sample()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("extra".into(), Value::Bool(true));
        let err = parse_dump(v.to_string().as_bytes(), false).unwrap_err();
        assert!(matches!(err, IngestError::Schema { line: 1, .. }));

        let mut v: Value = serde_json::to_value(sample()).unwrap();
        v.as_object_mut().unwrap().remove("tail_mass");
        let err = parse_dump(v.to_string().as_bytes(), false).unwrap_err();
        assert!(err.to_string().contains("tail_mass"));
    }

    #[test]
    fn invariant_breaches() {
        #[allow(clippy::type_complexity)]
        let cases: Vec<(fn(&mut DumpRecord), &str)> = vec![
            (|r| r.chosen_label = "B".into(), "argmax"),
            (|r| r.format_version = "2".into(), "format_version"),
            (|r| r.correct_label = Some("C".into()), "correct_label"),
            (|r| r.human_ratios = Some(vec![0.5, 0.6]), "human_ratios"),
            (|r| r.tail_mass = 0.5, "mass"),
            (
                |r| {
                    r.choice_probs.insert("C".into(), 0.1);
                },
                "keys",
            ),
            (|r| r.choice_permutation = Some(vec![0, 0]), "permutation"),
        ];
        for (mutate, needle) in cases {
            let mut r = sample();
            mutate(&mut r);
            let msg = r.validate().unwrap_err();
            assert!(msg.contains(needle), "{msg} lacks {needle}");
        }
    }

    #[test]
    fn over_26_choices_rejected() {
        let mut r = sample();
        r.choice_count = 27;
        assert!(r.validate().unwrap_err().contains("choice_count"));
    }

    #[test]
    fn lenient_skips_bad_lines() {
        let text = format!("{}\nnot json\n{}\n", line(&sample()), line(&sample()));
        let file = parse_dump(text.as_bytes(), true).unwrap();
        assert_eq!(file.records.len(), 2);
        assert_eq!(file.skipped.len(), 1);
        assert_eq!(file.skipped[0].line(), Some(2));
        assert!(parse_dump(text.as_bytes(), false).is_err());
    }

    #[test]
    fn empty_input_is_empty() {
        let file = parse_dump("".as_bytes(), false).unwrap();
        assert!(file.records.is_empty());
        assert!(file.header.is_none());
    }

    #[test]
    fn header_round_trip() {
        let header = DumpHeader {
            format_version: "1".into(),
            label_token_convention: Some("leading_space".into()),
            extra: [("model".to_string(), Value::String("tiny".into()))]
                .into_iter()
                .collect(),
        };
        let mut buf = Vec::new();
        write_dump(&mut buf, Some(&header), &[sample()]).unwrap();
        let file = parse_dump(buf.as_slice(), false).unwrap();
        assert_eq!(file.header, Some(header));
        assert_eq!(file.records, vec![sample()]);
    }
}

//! Survey tables and the cleaning pipeline applied before analysis.
//!
//! Table layout (comma separated, `#` lines are comments):
//!
//! ```text
//! question_id,text,choice_1,...,choice_M,ratio_1,...,ratio_M
//! ```
//!
//! Ratios are percentages. Questions with fewer than `M` choices leave the
//! trailing choice and ratio cells empty.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::alignment::SurveyQuestion;

/// Non-response answer choices, matched exactly after trimming and lowercasing.
pub const REFUSAL_OPTIONS: [&str; 17] = [
    "don't know/refused",
    "don't know/skipped",
    "don't know/skippedrefused",
    "no answer",
    "not selected",
    "not selected/no answer",
    "not sure/refused",
    "not sure/skipped",
    "omit",
    "refused",
    "refused/web blank",
    "skip",
    "skipped",
    "skipped on web",
    "skipped/refused",
    "skipped/web blank",
    "web blank",
];

pub fn is_refusal(choice: &str) -> bool {
    let normalized = choice.trim().to_lowercase();
    REFUSAL_OPTIONS.contains(&normalized.as_str())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSurveyQuestion {
    pub question_id: String,
    pub text: String,
    /// `(choice text, response percentage)` in presentation order.
    pub choices: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub total_in: usize,
    pub refusal_choices_removed: usize,
    pub dropped_lt2_choices: usize,
    pub dropped_invalid_sum: usize,
    pub total_out: usize,
}

impl CleaningStats {
    pub fn is_consistent(&self) -> bool {
        self.total_out + self.dropped_lt2_choices + self.dropped_invalid_sum == self.total_in
    }
}

/// What happened to one question during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleaningOutcome {
    Kept,
    DroppedTooFewChoices,
    DroppedInvalidSum,
}

/// Cleans a single question: refusal removal, choice-count check, sum window, renormalization.
///
/// Returns the outcome, the number of refusal choices removed and the cleaned question if kept.
pub fn clean_question(raw: &RawSurveyQuestion) -> (CleaningOutcome, usize, Option<SurveyQuestion>) {
    let kept: Vec<&(String, f64)> = raw.choices.iter().filter(|(c, _)| !is_refusal(c)).collect();
    let removed = raw.choices.len() - kept.len();
    if kept.len() < 2 {
        return (CleaningOutcome::DroppedTooFewChoices, removed, None);
    }
    let n = kept.len() as f64;
    let total: f64 = kept.iter().map(|(_, r)| r).sum();
    // Open window: each of N rounded percentages can be off by less than one point.
    if !(total > 100.0 - n && total < 100.0 + n) {
        return (CleaningOutcome::DroppedInvalidSum, removed, None);
    }
    let question = SurveyQuestion {
        question_id: raw.question_id.clone(),
        text: raw.text.clone(),
        choices: kept.iter().map(|(c, _)| c.clone()).collect(),
        human_ratios: kept.iter().map(|(_, r)| r / total).collect(),
    };
    (CleaningOutcome::Kept, removed, Some(question))
}

/// Applies [`clean_question`] to every question, preserving input order.
pub fn clean_survey(raw: &[RawSurveyQuestion]) -> (Vec<SurveyQuestion>, CleaningStats) {
    let mut stats = CleaningStats {
        total_in: raw.len(),
        ..CleaningStats::default()
    };
    let mut out = Vec::new();
    for q in raw {
        let (outcome, removed, cleaned) = clean_question(q);
        stats.refusal_choices_removed += removed;
        match outcome {
            CleaningOutcome::Kept => out.extend(cleaned),
            CleaningOutcome::DroppedTooFewChoices => stats.dropped_lt2_choices += 1,
            CleaningOutcome::DroppedInvalidSum => stats.dropped_invalid_sum += 1,
        }
    }
    stats.total_out = out.len();
    (out, stats)
}

fn schema(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        line,
        message: message.into(),
    }
}

/// Number of choice columns declared by a header, checking the layout.
fn choice_columns(header: &csv::StringRecord) -> Result<usize, IngestError> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "question_id" || cols[1] != "text" {
        return Err(schema(1, "header must start with question_id,text"));
    }
    let rest = &cols[2..];
    if !rest.len().is_multiple_of(2) || rest.is_empty() {
        return Err(schema(
            1,
            "header needs matching choice_i and ratio_i columns",
        ));
    }
    let m = rest.len() / 2;
    for i in 0..m {
        let (c, r) = (format!("choice_{}", i + 1), format!("ratio_{}", i + 1));
        if rest[i] != c || rest[m + i] != r {
            return Err(schema(1, format!("expected columns {c} and {r}")));
        }
    }
    Ok(m)
}

pub fn read_survey_csv<R: Read>(reader: R) -> Result<Vec<RawSurveyQuestion>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let m = choice_columns(&header)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut choices = Vec::new();
        for i in 0..m {
            let text = &row[2 + i];
            let ratio = row[2 + m + i].trim();
            match (text.is_empty(), ratio.is_empty()) {
                (true, true) => continue,
                (false, false) => {
                    let value: f64 = ratio.parse().map_err(|_| {
                        schema(line, format!("ratio_{} {ratio:?} is not a number", i + 1))
                    })?;
                    if !(value >= 0.0 && value.is_finite()) {
                        return Err(schema(
                            line,
                            format!("ratio_{} is negative or not finite", i + 1),
                        ));
                    }
                    choices.push((text.to_string(), value));
                }
                _ => {
                    return Err(schema(
                        line,
                        format!("choice_{0} and ratio_{0} must both be set", i + 1),
                    ))
                }
            }
        }
        out.push(RawSurveyQuestion {
            question_id: row[0].to_string(),
            text: row[1].to_string(),
            choices,
        });
    }
    Ok(out)
}

/// Writes cleaned questions in the input layout, ratios as percentages summing to 100.
pub fn write_survey_csv<W: Write>(
    mut writer: W,
    header_lines: &[String],
    questions: &[SurveyQuestion],
) -> Result<(), IngestError> {
    for line in header_lines {
        writeln!(writer, "# {line}")?;
    }
    let m = questions.iter().map(|q| q.choices.len()).max().unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut head = vec!["question_id".to_string(), "text".to_string()];
    head.extend((1..=m).map(|i| format!("choice_{i}")));
    head.extend((1..=m).map(|i| format!("ratio_{i}")));
    wtr.write_record(&head)?;
    for q in questions {
        let mut row = vec![q.question_id.clone(), q.text.clone()];
        row.extend((0..m).map(|i| q.choices.get(i).cloned().unwrap_or_default()));
        row.extend((0..m).map(|i| {
            q.human_ratios
                .get(i)
                .map(|r| (r * 100.0).to_string())
                .unwrap_or_default()
        }));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(id: &str, choices: &[(&str, f64)]) -> RawSurveyQuestion {
        RawSurveyQuestion {
            question_id: id.into(),
            text: format!("question {id}"),
            choices: choices.iter().map(|(c, r)| (c.to_string(), *r)).collect(),
        }
    }

    #[test]
    fn refusal_match_is_exact_after_trim_and_lowercase() {
        assert!(is_refusal("Refused"));
        assert!(is_refusal("  Don't know/Refused "));
        assert!(is_refusal("WEB BLANK"));
        assert!(!is_refusal("don't know"));
        assert!(!is_refusal("None of the above"));
        assert!(!is_refusal("refused to answer"));
    }

    #[test]
    fn refusal_then_sum_window_drop() {
        // N=2 after removal, window (98, 102), sum 95
        let (out, stats) =
            clean_survey(&[raw("1", &[("Yes", 48.0), ("No", 47.0), ("Refused", 5.0)])]);
        assert!(out.is_empty());
        assert_eq!(stats.refusal_choices_removed, 1);
        assert_eq!(stats.dropped_invalid_sum, 1);
    }

    #[test]
    fn kept_question_is_renormalized() {
        let (out, stats) = clean_survey(&[raw("1", &[("Yes", 60.0), ("No", 39.0)])]);
        assert_eq!(stats.total_out, 1);
        assert!((out[0].human_ratios[0] - 60.0 / 99.0).abs() < 1e-15);
        assert!((out[0].human_ratios[0] - 0.606061).abs() < 1e-6);
        assert!((out[0].human_ratios[1] - 0.393939).abs() < 1e-6);
    }

    #[test]
    fn all_refusals_drop_as_too_few_choices() {
        let (_, stats) = clean_survey(&[raw("1", &[("Refused", 50.0), ("Skipped", 50.0)])]);
        assert_eq!(stats.dropped_lt2_choices, 1);
        assert_eq!(stats.refusal_choices_removed, 2);
        assert!(stats.is_consistent());
    }

    #[test]
    fn window_is_open() {
        let (_, stats) = clean_survey(&[
            raw("edge_lo", &[("a", 49.0), ("b", 49.0)]),
            raw("edge_hi", &[("a", 51.0), ("b", 51.0)]),
            raw("inside", &[("a", 50.5), ("b", 51.0)]),
        ]);
        assert_eq!(stats.dropped_invalid_sum, 2);
        assert_eq!(stats.total_out, 1);
    }

    #[test]
    fn csv_round_trip() {
        let text =
            "# comment\nquestion_id,text,choice_1,choice_2,choice_3,ratio_1,ratio_2,ratio_3\n\
                    q1,\"Is it, really?\",Yes,No,Refused,48,47,5\n\
                    q2,Two only,Yes,No,,60,39,\n";
        let rows = read_survey_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].text, "Is it, really?");
        assert_eq!(rows[1].choices.len(), 2);

        let (clean, _) = clean_survey(&rows);
        let mut buf = Vec::new();
        write_survey_csv(&mut buf, &["seed: 1".into()], &clean).unwrap();
        let again = read_survey_csv(buf.as_slice()).unwrap();
        let (clean2, stats2) = clean_survey(&again);
        assert_eq!(stats2.total_out, 1);
        for (a, b) in clean[0].human_ratios.iter().zip(&clean2[0].human_ratios) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_errors_carry_lines() {
        let text = "question_id,text,choice_1,ratio_1\nq1,t,Yes,abc\n";
        let err = read_survey_csv(text.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(2));
        let text = "id,text,choice_1,ratio_1\n";
        assert!(read_survey_csv(text.as_bytes()).is_err());
        let text = "question_id,text,choice_1,ratio_1\nq1,t,Yes,\n";
        assert!(read_survey_csv(text.as_bytes()).is_err());
    }
}

//! Calibration of uncertainty measures against answer correctness.
//!
//! Two analyses: per-subject Spearman correlation between binary correctness
//! and each measure, and the Jensen-Shannon distance shift. For the latter,
//! questions are split at the standardized mean of a measure into a high- and
//! a low-certainty half; in each half the distribution of the model's answers
//! is compared with the distribution of correct answers. The shift is
//!
//! ```text
//! JSD(H_model, H_answer) - JSD(L_model, L_answer)
//! ```
//!
//! so a measure under which the model is accurate when certain and drifts
//! when uncertain yields a *negative* shift. Significance comes from a
//! permutation test that shuffles the high/low labels, keeping group sizes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::renormalize;
use crate::error::{Error, Result};
use crate::measures::{MeasureId, MeasureVector};
use crate::record::QuestionRecord;
use crate::stats::{
    jsd, permutation_test, spearman, standardize, PermutationOutcome, SeedStream, Sided,
};

pub const DEFAULT_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certainty {
    High,
    Low,
}

/// Splits standardized uncertainty scores at zero.
///
/// Below zero is high certainty, above zero is low certainty, and each exact
/// zero is settled by one fair draw from the `(seed, "partition", 0)` stream,
/// taken in input order. With `invert` the scores are read as certainties.
pub fn partition(zscores: &[f64], rng: &SeedStream, invert: bool) -> Vec<Certainty> {
    let mut draws = rng.stream("partition", 0);
    zscores
        .iter()
        .map(|&z| {
            let z = if invert { -z } else { z };
            if z < 0.0 {
                Certainty::High
            } else if z > 0.0 {
                Certainty::Low
            } else if draws.random_bool(0.5) {
                Certainty::High
            } else {
                Certainty::Low
            }
        })
        .collect()
}

/// Answer-label counts in each certainty group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDistributions {
    pub h_model: Vec<u64>,
    pub h_answer: Vec<u64>,
    pub l_model: Vec<u64>,
    pub l_answer: Vec<u64>,
}

impl PartitionDistributions {
    pub fn high_size(&self) -> u64 {
        self.h_answer.iter().sum()
    }

    pub fn low_size(&self) -> u64 {
        self.l_answer.iter().sum()
    }

    /// `JSD(H_model, H_answer) - JSD(L_model, L_answer)`.
    pub fn shift(&self) -> Result<f64> {
        if self.high_size() == 0 {
            return Err(Error::EmptyPartition("high"));
        }
        if self.low_size() == 0 {
            return Err(Error::EmptyPartition("low"));
        }
        let high = jsd(&normalize(&self.h_model)?, &normalize(&self.h_answer)?)?;
        let low = jsd(&normalize(&self.l_model)?, &normalize(&self.l_answer)?)?;
        Ok(high - low)
    }
}

fn normalize(counts: &[u64]) -> Result<Vec<f64>> {
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(renormalize(&as_f64)?.into_vec())
}

/// Model answers and correct answers over a shared label space.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSheet {
    pub n_labels: usize,
    pub model: Vec<usize>,
    pub answer: Vec<usize>,
}

impl AnswerSheet {
    /// Requires every record to carry a correct answer and the same choice count.
    pub fn from_records(records: &[QuestionRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Degenerate("no questions".into()))?;
        let n_labels = first.choice_count();
        let mut model = Vec::with_capacity(records.len());
        let mut answer = Vec::with_capacity(records.len());
        for r in records {
            if r.choice_count() != n_labels {
                return Err(Error::LabelSpace(format!(
                    "question {} has {} choices, expected {n_labels}",
                    r.question_id,
                    r.choice_count()
                )));
            }
            let correct = r.correct.ok_or_else(|| {
                Error::LabelSpace(format!("question {} has no correct answer", r.question_id))
            })?;
            if correct >= n_labels {
                return Err(Error::LabelSpace(format!(
                    "question {} has correct answer index {correct} outside {n_labels} labels",
                    r.question_id
                )));
            }
            model.push(r.chosen);
            answer.push(correct);
        }
        Ok(Self {
            n_labels,
            model,
            answer,
        })
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    pub fn distributions(&self, groups: &[Certainty]) -> Result<PartitionDistributions> {
        if groups.len() != self.len() {
            return Err(Error::Length {
                expected: self.len(),
                got: groups.len(),
            });
        }
        let mut parts = PartitionDistributions {
            h_model: vec![0; self.n_labels],
            h_answer: vec![0; self.n_labels],
            l_model: vec![0; self.n_labels],
            l_answer: vec![0; self.n_labels],
        };
        for ((&g, &m), &a) in groups.iter().zip(&self.model).zip(&self.answer) {
            match g {
                Certainty::High => {
                    parts.h_model[m] += 1;
                    parts.h_answer[a] += 1;
                }
                Certainty::Low => {
                    parts.l_model[m] += 1;
                    parts.l_answer[a] += 1;
                }
            }
        }
        Ok(parts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibConfig {
    pub iters: usize,
    pub sided: Sided,
    /// Read measure values as certainties rather than uncertainties.
    pub invert: bool,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            iters: DEFAULT_ITERS,
            sided: Sided::TwoSided,
            invert: false,
        }
    }
}

/// Standardizes `values`, partitions at zero and returns the observed shift.
pub fn jsd_shift(
    sheet: &AnswerSheet,
    values: &[f64],
    rng: &SeedStream,
    invert: bool,
) -> Result<(f64, PartitionDistributions, Vec<Certainty>)> {
    if values.len() != sheet.len() {
        return Err(Error::Length {
            expected: sheet.len(),
            got: values.len(),
        });
    }
    let z = standardize(values)?;
    let groups = partition(&z, rng, invert);
    let parts = sheet.distributions(&groups)?;
    let shift = parts.shift()?;
    Ok((shift, parts, groups))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTest {
    pub shift: f64,
    pub parts: PartitionDistributions,
    pub outcome: PermutationOutcome,
}

/// Observed shift plus its permutation null under shuffled certainty labels.
pub fn jsd_shift_test(
    sheet: &AnswerSheet,
    values: &[f64],
    rng: &SeedStream,
    cfg: &CalibConfig,
) -> Result<ShiftTest> {
    let (shift, parts, groups) = jsd_shift(sheet, values, rng, cfg.invert)?;
    let resample = |r: &mut rand_chacha::ChaCha8Rng| {
        let mut shuffled = groups.clone();
        shuffled.shuffle(r);
        // Group sizes are preserved, so neither side can be empty.
        sheet
            .distributions(&shuffled)
            .and_then(|p| p.shift())
            .expect("permuted partition keeps both sides non-empty")
    };
    let outcome = permutation_test(shift, resample, cfg.iters, rng, cfg.sided);
    Ok(ShiftTest {
        shift,
        parts,
        outcome,
    })
}

/// Spearman correlations between correctness and each measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Row labels; `["all"]` when not grouped by subject.
    pub subjects: Vec<String>,
    pub measures: Vec<String>,
    /// `rho[subject][measure]`, `None` where correctness or the measure is constant.
    pub rho: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, subject: &str, measure: &str) -> Option<f64> {
        let s = self.subjects.iter().position(|x| x == subject)?;
        let m = self.measures.iter().position(|x| x == measure)?;
        self.rho[s][m]
    }
}

fn check_keys(records: &[QuestionRecord], vectors: &[MeasureVector]) -> Result<()> {
    if records.len() != vectors.len() {
        return Err(Error::KeyMismatch(format!(
            "{} records but {} measure vectors",
            records.len(),
            vectors.len()
        )));
    }
    if let Some((r, v)) = records
        .iter()
        .zip(vectors)
        .find(|(r, v)| r.question_id != v.question_id)
    {
        return Err(Error::KeyMismatch(format!(
            "record {} paired with measures for {}",
            r.question_id, v.question_id
        )));
    }
    Ok(())
}

/// Correctness (1 = correct) against each measure, optionally per subject.
///
/// Negative values mean the model is more often right when the measure is low.
pub fn correctness_correlation(
    records: &[QuestionRecord],
    vectors: &[MeasureVector],
    measures: &[MeasureId],
    group_by_subject: bool,
) -> Result<CorrelationMatrix> {
    check_keys(records, vectors)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = if group_by_subject {
            r.subject.clone().ok_or_else(|| {
                Error::KeyMismatch(format!("question {} has no subject", r.question_id))
            })?
        } else {
            "all".to_string()
        };
        groups.entry(key).or_default().push(i);
    }
    let mut rho = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let row = measures
            .iter()
            .map(|&id| -> Result<Option<f64>> {
                let mut correct = Vec::with_capacity(members.len());
                let mut values = Vec::with_capacity(members.len());
                for &i in members {
                    let c = records[i].is_correct().ok_or_else(|| {
                        Error::LabelSpace(format!(
                            "question {} has no correct answer",
                            records[i].question_id
                        ))
                    })?;
                    if let Some(v) = vectors[i].get(id) {
                        correct.push(if c { 1.0 } else { 0.0 });
                        values.push(v);
                    }
                }
                Ok(spearman(&correct, &values).ok())
            })
            .collect::<Result<Vec<_>>>()?;
        rho.push(row);
    }
    Ok(CorrelationMatrix {
        subjects: groups.into_keys().collect(),
        measures: measures.iter().map(|m| m.to_string()).collect(),
        rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureShift {
    pub measure: String,
    pub shift: Option<f64>,
    pub p_value: Option<f64>,
    pub high_size: u64,
    pub low_size: u64,
    pub sided: Sided,
    pub n_resamples: usize,
    pub parts: Option<PartitionDistributions>,
    /// Permutation null sample, emitted separately as histogram data.
    #[serde(skip)]
    pub null: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_questions: usize,
    pub n_labels: usize,
    pub correlation: CorrelationMatrix,
    pub shifts: Vec<MeasureShift>,
}

/// Whether larger values of a measure mean more certainty.
fn higher_is_certain(id: MeasureId) -> bool {
    matches!(id, MeasureId::Top1Prob)
}

/// Runs both calibration analyses for every measure.
///
/// Measures with a missing cell on any question, or constant across the
/// dataset, get an empty shift row instead of failing the run.
pub fn calibration_report(
    records: &[QuestionRecord],
    vectors: &[MeasureVector],
    measures: &[MeasureId],
    group_by_subject: bool,
    cfg: &CalibConfig,
    rng: &SeedStream,
) -> Result<CalibrationReport> {
    let correlation = correctness_correlation(records, vectors, measures, group_by_subject)?;
    let sheet = AnswerSheet::from_records(records)?;
    let mut shifts = Vec::with_capacity(measures.len());
    for &id in measures {
        let values: Option<Vec<f64>> = vectors.iter().map(|v| v.get(id)).collect();
        let invert = cfg.invert != higher_is_certain(id);
        let test = values
            .ok_or_else(|| Error::Degenerate(format!("{id} is missing on some questions")))
            .and_then(|values| {
                jsd_shift_test(
                    &sheet,
                    &values,
                    rng,
                    &CalibConfig {
                        invert,
                        ..cfg.clone()
                    },
                )
            });
        shifts.push(match test {
            Ok(t) => MeasureShift {
                measure: id.to_string(),
                shift: Some(t.shift),
                p_value: Some(t.outcome.result.p_value),
                high_size: t.parts.high_size(),
                low_size: t.parts.low_size(),
                sided: cfg.sided,
                n_resamples: t.outcome.result.n_resamples,
                parts: Some(t.parts),
                null: t.outcome.null,
            },
            Err(e) => {
                log::warn!("no JSD shift for {id}: {e}");
                MeasureShift {
                    measure: id.to_string(),
                    shift: None,
                    p_value: None,
                    high_size: 0,
                    low_size: 0,
                    sided: cfg.sided,
                    n_resamples: 0,
                    parts: None,
                    null: Vec::new(),
                }
            }
        });
    }
    Ok(CalibrationReport {
        n_questions: records.len(),
        n_labels: sheet.n_labels,
        correlation,
        shifts,
    })
}

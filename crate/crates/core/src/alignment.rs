//! Alignment between model and human group uncertainty.
//!
//! Three views: whether the model's cloze answer matches the human plurality,
//! how far the model's preference order over choices is from the human one
//! (normalized Kendall tau distance), and how strongly each model measure
//! correlates with the entropy of the human response distribution.

use serde::{Deserialize, Serialize};

use crate::dist::renormalize;
use crate::error::{Error, Result};
use crate::measures::{MeasureId, MeasureVector};
use crate::record::QuestionRecord;
use crate::stats::{one_proportion_ztest, pearson, shannon_entropy, spearman, TestResult};

/// Default reporting threshold on |r|. This flags a measure; it is not a hypothesis test.
pub const DEFAULT_R_THRESHOLD: f64 = 0.3;

// Human ratios this close to the maximum count as tied for the plurality.
const PLURALITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyQuestion {
    pub question_id: String,
    pub text: String,
    pub choices: Vec<String>,
    /// Normalized response shares, one per choice.
    pub human_ratios: Vec<f64>,
}

/// Entropy of the normalized human response distribution.
pub fn human_entropy(ratios: &[f64]) -> Result<f64> {
    Ok(shannon_entropy(renormalize(ratios)?.probs()))
}

impl SurveyQuestion {
    pub fn human_entropy(&self) -> Result<f64> {
        human_entropy(&self.human_ratios)
    }
}

/// Items ordered by preference, with tie groups remembered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<usize>,
    /// Tie group of each item (indexed by item, not position).
    group: Vec<usize>,
}

impl Ranking {
    /// A tie-free ranking from an explicit order of item indices.
    pub fn from_order(order: Vec<usize>) -> Self {
        let mut group = vec![0; order.len()];
        for (pos, &item) in order.iter().enumerate() {
            group[item] = pos;
        }
        Self { order, group }
    }

    /// Item indices from most to least preferred.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// For each position in [`Ranking::order`], whether it shares its value with another position.
    pub fn tied_positions(&self) -> Vec<bool> {
        self.order
            .iter()
            .map(|&item| {
                self.order
                    .iter()
                    .any(|&other| other != item && self.group[other] == self.group[item])
            })
            .collect()
    }

    fn tied(&self, a: usize, b: usize) -> bool {
        self.group[a] == self.group[b]
    }

    fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &item) in self.order.iter().enumerate() {
            pos[item] = p;
        }
        pos
    }
}

/// Orders items by value, highest first; equal values keep index order and form a tie group.
pub fn preference_order(values: &[f64]) -> Ranking {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut group = vec![0; values.len()];
    let mut current = 0;
    for (pos, &item) in order.iter().enumerate() {
        if pos > 0 && values[item] != values[order[pos - 1]] {
            current = pos;
        }
        group[item] = current;
    }
    Ranking { order, group }
}

/// Normalized Kendall tau distance: discordant pairs over comparable pairs.
///
/// Pairs tied in either ranking are left out of both counts. Returns `None`
/// when no comparable pair remains.
pub fn kendall_distance(a: &Ranking, b: &Ranking) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::Length {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Length {
            expected: 2,
            got: a.len(),
        });
    }
    let (pa, pb) = (a.positions(), b.positions());
    let n = a.len();
    let mut comparable = 0u64;
    let mut discordant = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            if a.tied(i, j) || b.tied(i, j) {
                continue;
            }
            comparable += 1;
            if (pa[i] < pa[j]) != (pb[i] < pb[j]) {
                discordant += 1;
            }
        }
    }
    Ok((comparable > 0).then(|| discordant as f64 / comparable as f64))
}

/// Top-answer agreement between model and humans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n_questions: usize,
    pub agreements: usize,
    pub rate: f64,
    /// Mean of `1 / choice count` over questions.
    pub random_chance: f64,
    pub z_test: TestResult,
    /// Questions whose human plurality was tied; these agree when the model picks any leader.
    pub tied_plurality_questions: usize,
}

fn human_ratios(record: &QuestionRecord) -> Result<&[f64]> {
    let ratios = record.human_ratios.as_deref().ok_or_else(|| {
        Error::KeyMismatch(format!(
            "question {} has no human ratios",
            record.question_id
        ))
    })?;
    if ratios.len() != record.choice_count() {
        return Err(Error::Length {
            expected: record.choice_count(),
            got: ratios.len(),
        });
    }
    Ok(ratios)
}

pub fn agreement(records: &[QuestionRecord]) -> Result<Agreement> {
    if records.is_empty() {
        return Err(Error::Degenerate("no questions".into()));
    }
    let mut agreements = 0;
    let mut tied = 0;
    let mut chance = 0.0;
    for record in records {
        let ratios = human_ratios(record)?;
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let leaders: Vec<usize> = (0..ratios.len())
            .filter(|&i| ratios[i] >= max - PLURALITY_TOLERANCE)
            .collect();
        if leaders.len() > 1 {
            tied += 1;
        }
        if leaders.contains(&record.chosen) {
            agreements += 1;
        }
        chance += 1.0 / record.choice_count() as f64;
    }
    let n = records.len();
    let random_chance = chance / n as f64;
    Ok(Agreement {
        n_questions: n,
        agreements,
        rate: agreements as f64 / n as f64,
        random_chance,
        z_test: one_proportion_ztest(agreements as u64, n as u64, random_chance)?,
        tied_plurality_questions: tied,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    #[default]
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub measures: Vec<MeasureId>,
    pub significance_threshold: f64,
    pub correlation: CorrelationKind,
}

impl AlignConfig {
    pub fn new(measures: Vec<MeasureId>) -> Self {
        Self {
            measures,
            significance_threshold: DEFAULT_R_THRESHOLD,
            correlation: CorrelationKind::Pearson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCorrelation {
    pub measure: String,
    /// `None` when the column is constant or too short.
    pub r: Option<f64>,
    pub n: usize,
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub n_questions: usize,
    pub agreement: Agreement,
    pub kendall_mean: Option<f64>,
    pub kendall_std: Option<f64>,
    /// Questions with at least one comparable pair.
    pub kendall_n: usize,
    pub correlation: CorrelationKind,
    pub significance_threshold: f64,
    pub by_measure: Vec<MeasureCorrelation>,
}

impl AlignmentReport {
    pub fn r(&self, measure: &str) -> Option<f64> {
        self.by_measure.iter().find(|m| m.measure == measure)?.r
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
    for (r, v) in records.iter().zip(vectors) {
        if r.question_id != v.question_id {
            return Err(Error::KeyMismatch(format!(
                "record {} paired with measures for {}",
                r.question_id, v.question_id
            )));
        }
    }
    Ok(())
}

/// Mean and population standard deviation.
fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Builds the full alignment report. `vectors[i]` must belong to `records[i]`.
pub fn alignment_report(
    records: &[QuestionRecord],
    vectors: &[MeasureVector],
    cfg: &AlignConfig,
) -> Result<AlignmentReport> {
    check_keys(records, vectors)?;
    let agreement = agreement(records)?;

    let mut entropies = Vec::with_capacity(records.len());
    let mut distances = Vec::new();
    for record in records {
        let ratios = human_ratios(record)?;
        entropies.push(human_entropy(ratios)?);
        let model = preference_order(&record.choice_probs);
        let human = preference_order(ratios);
        if let Some(d) = kendall_distance(&model, &human)? {
            distances.push(d);
        }
    }
    let (kendall_mean, kendall_std) = mean_std(&distances);

    let by_measure = cfg
        .measures
        .iter()
        .map(|&id| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = entropies
                .iter()
                .zip(vectors)
                .filter_map(|(&h, v)| v.get(id).map(|m| (h, m)))
                .unzip();
            let r = match cfg.correlation {
                CorrelationKind::Pearson => pearson(&xs, &ys),
                CorrelationKind::Spearman => spearman(&xs, &ys),
            };
            let r = match r {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("no correlation for {id}: {e}");
                    None
                }
            };
            MeasureCorrelation {
                measure: id.to_string(),
                r,
                n: xs.len(),
                above_threshold: r.is_some_and(|r| r.abs() >= cfg.significance_threshold),
            }
        })
        .collect();

    Ok(AlignmentReport {
        n_questions: records.len(),
        agreement,
        kendall_mean,
        kendall_std,
        kendall_n: distances.len(),
        correlation: cfg.correlation,
        significance_threshold: cfg.significance_threshold,
        by_measure,
    })
}

/// Measures whose |r| reaches `cut` in every given report.
///
/// Pass one report per model and dataset for the joint roll-up, or the
/// reports of a single dataset for the per-dataset roll-up.
pub fn top_performing(reports: &[&AlignmentReport], cut: f64) -> Vec<String> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    first
        .by_measure
        .iter()
        .map(|m| m.measure.clone())
        .filter(|name| {
            reports
                .iter()
                .all(|rep| rep.r(name).is_some_and(|r| r.abs() >= cut))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::TokenDistribution;
    use crate::measures::{compute_measures, MeasureConfig};

    #[test]
    fn human_entropy_examples() {
        assert!((human_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(human_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let h = human_entropy(&[60.0, 30.0, 10.0]).unwrap();
        let oracle = -(0.6f64 * 0.6f64.ln() + 0.3 * 0.3f64.ln() + 0.1 * 0.1f64.ln());
        assert!((h - oracle).abs() < 1e-12);
        assert!((h - 0.897946).abs() < 1e-6);
        assert!(human_entropy(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn preference_order_examples() {
        let r = preference_order(&[0.1, 0.7, 0.2]);
        assert_eq!(r.order(), &[1, 2, 0]);
        assert_eq!(r.tied_positions(), vec![false; 3]);

        let r = preference_order(&[0.3; 4]);
        assert_eq!(r.order(), &[0, 1, 2, 3]);
        assert_eq!(r.tied_positions(), vec![true; 4]);

        let r = preference_order(&[45.0, 45.0, 10.0]);
        assert_eq!(r.order(), &[0, 1, 2]);
        assert_eq!(r.tied_positions(), vec![true, true, false]);
    }

    #[test]
    fn kendall_examples() {
        let abc = Ranking::from_order(vec![0, 1, 2]);
        assert_eq!(kendall_distance(&abc, &abc).unwrap(), Some(0.0));
        let cba = Ranking::from_order(vec![2, 1, 0]);
        assert_eq!(kendall_distance(&abc, &cba).unwrap(), Some(1.0));
        let bac = Ranking::from_order(vec![1, 0, 2]);
        assert_eq!(kendall_distance(&bac, &abc).unwrap(), Some(1.0 / 3.0));
    }

    #[test]
    fn kendall_excludes_tied_pairs() {
        // Human tie between items 0 and 1 leaves pairs (0,2) and (1,2).
        let human = preference_order(&[45.0, 45.0, 10.0]);
        let model = preference_order(&[0.1, 0.3, 0.6]);
        assert_eq!(kendall_distance(&model, &human).unwrap(), Some(1.0));
        let model = preference_order(&[0.5, 0.1, 0.4]);
        assert_eq!(kendall_distance(&model, &human).unwrap(), Some(0.5));
        let flat = preference_order(&[0.5, 0.5]);
        assert_eq!(kendall_distance(&flat, &flat).unwrap(), None);
        assert!(kendall_distance(&flat, &human).is_err());
    }

    fn record(id: &str, choice_probs: Vec<f64>, human: Vec<f64>) -> QuestionRecord {
        let dist = TokenDistribution::from_probs(&[0.6, 0.3, 0.1]).unwrap();
        QuestionRecord::new(id, dist, choice_probs)
            .unwrap()
            .with_human_ratios(human)
    }

    #[test]
    fn agreement_counts_and_chance() {
        let records = vec![
            record("a", vec![0.7, 0.1, 0.1, 0.1], vec![0.4, 0.3, 0.2, 0.1]),
            record("b", vec![0.1, 0.7, 0.1, 0.1], vec![0.4, 0.3, 0.2, 0.1]),
        ];
        let a = agreement(&records).unwrap();
        assert_eq!(a.agreements, 1);
        assert_eq!(a.random_chance, 0.25);
        assert_eq!(a.tied_plurality_questions, 0);
    }

    #[test]
    fn agreement_tie_counts_when_model_picks_a_leader() {
        let records = vec![
            record("a", vec![0.1, 0.8], vec![0.5, 0.5]),
            record("b", vec![0.1, 0.1, 0.8], vec![0.45, 0.45, 0.1]),
        ];
        let a = agreement(&records).unwrap();
        assert_eq!(a.agreements, 1);
        assert_eq!(a.tied_plurality_questions, 2);
        assert!((a.random_chance - (0.5 + 1.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_agreement_is_significant() {
        let records: Vec<QuestionRecord> = (0..200)
            .map(|i| {
                let mut probs = vec![0.1; 4];
                probs[i % 4] = 0.7;
                let mut human = vec![0.2; 4];
                human[i % 4] = 0.4;
                record(&format!("q{i}"), probs, human)
            })
            .collect();
        let a = agreement(&records).unwrap();
        assert_eq!(a.rate, 1.0);
        assert!(a.z_test.p_value < 1e-12);
    }

    #[test]
    fn report_flags_exact_measure_and_nulls_constant_column() {
        let humans = [
            vec![0.5, 0.5],
            vec![0.9, 0.1],
            vec![0.7, 0.3],
            vec![0.6, 0.4],
            vec![1.0, 0.0],
        ];
        let records: Vec<QuestionRecord> = humans
            .iter()
            .enumerate()
            .map(|(i, h)| {
                // Model choice distribution equals the human one, so choice entropy = human entropy.
                record(&format!("q{i}"), h.clone(), h.clone())
            })
            .collect();
        let cfg = MeasureConfig {
            k_values: vec![2],
            p_values: vec![0.5],
            ..MeasureConfig::default()
        };
        let vectors: Vec<MeasureVector> = records
            .iter()
            .map(|r| compute_measures(r, &cfg).unwrap())
            .collect();
        let report =
            alignment_report(&records, &vectors, &AlignConfig::new(cfg.measure_ids())).unwrap();
        let choice = report
            .by_measure
            .iter()
            .find(|m| m.measure == "choice_entropy")
            .unwrap();
        assert!((choice.r.unwrap() - 1.0).abs() < 1e-12);
        assert!(choice.above_threshold);
        // identical token distribution everywhere
        assert_eq!(report.r("total_entropy"), None);
        assert_eq!(report.kendall_mean, Some(0.0));
        assert_eq!(
            top_performing(&[&report], 0.5),
            vec!["choice_entropy".to_string()]
        );
    }

    #[test]
    fn report_rejects_misaligned_vectors() {
        let records = vec![record("a", vec![0.5, 0.5], vec![0.5, 0.5])];
        let cfg = MeasureConfig {
            k_values: vec![1],
            p_values: vec![0.5],
            ..MeasureConfig::default()
        };
        let mut v = compute_measures(&records[0], &cfg).unwrap();
        v.question_id = "other".into();
        let err =
            alignment_report(&records, &[v], &AlignConfig::new(cfg.measure_ids())).unwrap_err();
        assert!(matches!(err, Error::KeyMismatch(_)));
    }
}

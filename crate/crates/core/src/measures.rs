//! The inference-time uncertainty measure family.
//!
//! Every measure is computed from a single forward pass: the next-token
//! distribution after the prompt and the probabilities of the answer-label
//! tokens within it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{renormalize, top_k_subset, top_p_set, NucleusMode, TokenDistribution};
use crate::error::{Error, Result};
use crate::record::{QuestionRecord, MAX_CHOICES};
use crate::stats::shannon_entropy;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureConfig {
    pub k_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub nucleus_mode: NucleusMode,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            k_values: vec![5, 10, 25, 50, 100],
            p_values: vec![0.95, 0.9, 0.75, 0.5],
            nucleus_mode: NucleusMode::Standard,
        }
    }
}

impl MeasureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.first() == Some(&0) || self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Degenerate(
                "k values must be positive and strictly increasing".into(),
            ));
        }
        if self.p_values.iter().any(|&p| !(p > 0.0 && p < 1.0))
            || self.p_values.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Error::Degenerate(
                "p values must lie in (0, 1) and be strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    /// Measure identifiers in report column order.
    pub fn measure_ids(&self) -> Vec<MeasureId> {
        let mut ids = vec![
            MeasureId::Top1Prob,
            MeasureId::TotalEntropy,
            MeasureId::ChoiceEntropy,
        ];
        ids.extend(self.k_values.iter().map(|&k| MeasureId::TopKEntropy(k)));
        ids.extend(self.p_values.iter().map(|&p| MeasureId::TopPEntropy(p)));
        ids.extend(self.p_values.iter().map(|&p| MeasureId::TopPSize(p)));
        ids
    }
}

/// Names one measure column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureId {
    Top1Prob,
    TotalEntropy,
    ChoiceEntropy,
    TopKEntropy(usize),
    TopPEntropy(f64),
    TopPSize(f64),
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureId::Top1Prob => f.write_str("top1_prob"),
            MeasureId::TotalEntropy => f.write_str("total_entropy"),
            MeasureId::ChoiceEntropy => f.write_str("choice_entropy"),
            MeasureId::TopKEntropy(k) => write!(f, "top_k_entropy_k{k}"),
            MeasureId::TopPEntropy(p) => write!(f, "top_p_entropy_p{p}"),
            MeasureId::TopPSize(p) => write!(f, "top_p_size_p{p}"),
        }
    }
}

impl FromStr for MeasureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("unknown measure {s:?}");
        Ok(match s {
            "top1_prob" => MeasureId::Top1Prob,
            "total_entropy" => MeasureId::TotalEntropy,
            "choice_entropy" => MeasureId::ChoiceEntropy,
            _ => {
                if let Some(k) = s.strip_prefix("top_k_entropy_k") {
                    MeasureId::TopKEntropy(k.parse().map_err(|_| bad())?)
                } else if let Some(p) = s.strip_prefix("top_p_entropy_p") {
                    MeasureId::TopPEntropy(p.parse().map_err(|_| bad())?)
                } else if let Some(p) = s.strip_prefix("top_p_size_p") {
                    MeasureId::TopPSize(p.parse().map_err(|_| bad())?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKCell {
    pub k: usize,
    pub entropy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopPCell {
    pub p: f64,
    pub entropy: Option<f64>,
    pub size: Option<usize>,
}

/// All measure values for one question. `None` marks a cell the dump could not support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureVector {
    pub question_id: String,
    pub top1_prob: f64,
    pub total_entropy: f64,
    pub choice_entropy: f64,
    pub top_k_entropy: Vec<TopKCell>,
    pub top_p: Vec<TopPCell>,
}

impl MeasureVector {
    pub fn get(&self, id: MeasureId) -> Option<f64> {
        match id {
            MeasureId::Top1Prob => Some(self.top1_prob),
            MeasureId::TotalEntropy => Some(self.total_entropy),
            MeasureId::ChoiceEntropy => Some(self.choice_entropy),
            MeasureId::TopKEntropy(k) => self.top_k_entropy.iter().find(|c| c.k == k)?.entropy,
            MeasureId::TopPEntropy(p) => self.top_p.iter().find(|c| c.p == p)?.entropy,
            MeasureId::TopPSize(p) => self.top_p.iter().find(|c| c.p == p)?.size.map(|s| s as f64),
        }
    }
}

/// Probability of the most likely token, not renormalized.
pub fn top1(dist: &TokenDistribution) -> Result<f64> {
    dist.entries().first().map(|e| e.prob).ok_or(Error::Empty)
}

/// Entropy over the whole vocabulary.
///
/// Uses the producer's exact value when supplied; otherwise the unlisted tail
/// is treated as uniform over `tail_count` tokens.
pub fn total_entropy(dist: &TokenDistribution) -> f64 {
    if let Some(h) = dist.exact_total_entropy() {
        return h;
    }
    let listed: Vec<f64> = dist.entries().iter().map(|e| e.prob).collect();
    let mut h = shannon_entropy(&listed);
    let tail = dist.tail_mass();
    if tail > 0.0 && dist.tail_count() > 0 {
        h -= tail * (tail / dist.tail_count() as f64).ln();
    }
    h
}

/// Entropy of the renormalized answer-label probabilities.
pub fn choice_entropy(choice_probs: &[f64]) -> Result<f64> {
    if !(2..=MAX_CHOICES).contains(&choice_probs.len()) {
        return Err(Error::Range {
            what: "choice count",
            value: choice_probs.len() as f64,
        });
    }
    Ok(shannon_entropy(renormalize(choice_probs)?.probs()))
}

pub fn top_k_entropy(dist: &TokenDistribution, k: usize) -> Result<f64> {
    Ok(shannon_entropy(top_k_subset(dist, k)?.probs()))
}

pub fn top_p_entropy(dist: &TokenDistribution, p: f64, mode: NucleusMode) -> Result<f64> {
    Ok(shannon_entropy(top_p_set(dist, p, mode)?.probs()))
}

pub fn top_p_size(dist: &TokenDistribution, p: f64, mode: NucleusMode) -> Result<usize> {
    Ok(top_p_set(dist, p, mode)?.source_size())
}

/// Computes every configured measure, failing on the first unsupported cell.
pub fn compute_measures(record: &QuestionRecord, cfg: &MeasureConfig) -> Result<MeasureVector> {
    let (vector, errors) = compute_measures_partial(record, cfg)?;
    match errors.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(vector),
    }
}

/// Computes every configured measure, leaving cells that hit a truncated dump as `None`.
///
/// The returned errors name the offending `k` or `p`. Errors in the
/// always-available measures (top-1, total, choice entropy) are fatal.
pub fn compute_measures_partial(
    record: &QuestionRecord,
    cfg: &MeasureConfig,
) -> Result<(MeasureVector, Vec<Error>)> {
    let dist = &record.dist;
    let mut errors = Vec::new();
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let top_k_entropy = cfg
        .k_values
        .iter()
        .map(|&k| TopKCell {
            k,
            entropy: keep(top_k_entropy(dist, k)),
        })
        .collect();
    let top_p = cfg
        .p_values
        .iter()
        .map(|&p| {
            let entropy = keep(top_p_entropy(dist, p, cfg.nucleus_mode));
            // Size fails exactly when entropy does; don't report the error twice.
            let size = top_p_size(dist, p, cfg.nucleus_mode).ok();
            TopPCell { p, entropy, size }
        })
        .collect();
    let vector = MeasureVector {
        question_id: record.question_id.clone(),
        top1_prob: top1(dist)?,
        total_entropy: total_entropy(dist),
        choice_entropy: choice_entropy(&record.choice_probs)?,
        top_k_entropy,
        top_p,
    };
    Ok((vector, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::TokenProb;
    use crate::error::SubsetRequest;

    fn dist(probs: &[f64]) -> TokenDistribution {
        TokenDistribution::from_probs(probs).unwrap()
    }

    #[test]
    fn top1_examples() {
        assert_eq!(top1(&dist(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(top1(&dist(&[0.2, 0.5, 0.3])).unwrap(), 0.5);
        let d = TokenDistribution::new(
            vec![TokenProb::new(1, 0.35), TokenProb::new(2, 0.25)],
            0.4,
            5000,
            None,
        )
        .unwrap();
        assert_eq!(top1(&d).unwrap(), 0.35);
        let empty = TokenDistribution::new(vec![], 1.0, 10, None).unwrap();
        assert_eq!(top1(&empty), Err(Error::Empty));
    }

    #[test]
    fn total_entropy_examples() {
        assert!((total_entropy(&dist(&[0.25; 4])) - 4f64.ln()).abs() < 1e-12);
        let exact =
            TokenDistribution::new(vec![TokenProb::new(0, 0.5)], 0.5, 99, Some(2.31)).unwrap();
        assert_eq!(total_entropy(&exact), 2.31);

        // Tail of 0.2 over two tokens expands to two explicit 0.1 tokens.
        let truncated = TokenDistribution::new(
            vec![TokenProb::new(0, 0.5), TokenProb::new(1, 0.3)],
            0.2,
            2,
            None,
        )
        .unwrap();
        let expanded = shannon_entropy(&[0.5, 0.3, 0.1, 0.1]);
        assert!((total_entropy(&truncated) - expanded).abs() < 1e-12);
    }

    #[test]
    fn choice_entropy_examples() {
        assert!((choice_entropy(&[0.1; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(choice_entropy(&[0.7, 0.0, 0.0]).unwrap(), 0.0);
        // [0.5, 0.25, 0.125, 0.125]: 0.5 ln2 + 0.25 ln4 + 2 * 0.125 ln8 = 1.75 ln 2
        let h = choice_entropy(&[0.04, 0.02, 0.01, 0.01]).unwrap();
        assert!((h - 1.75 * 2f64.ln()).abs() < 1e-12);
        assert!((h - 1.213008).abs() < 1e-6);
        assert!(matches!(
            choice_entropy(&[0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(choice_entropy(&[1.0]).is_err());
    }

    #[test]
    fn top_k_entropy_examples() {
        let d = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(top_k_entropy(&d, 1).unwrap(), 0.0);
        let h = top_k_entropy(&d, 2).unwrap();
        assert!((h - shannon_entropy(&[0.625, 0.375])).abs() < 1e-12);
        assert!((h - 0.661563).abs() < 1e-6);
        let flat = TokenDistribution::new(
            (0..5).map(|i| TokenProb::new(i, 0.1)).collect(),
            0.5,
            100,
            None,
        )
        .unwrap();
        assert!((top_k_entropy(&flat, 5).unwrap() - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn top_p_examples() {
        let one_hot = dist(&[1.0, 0.0, 0.0]);
        assert_eq!(top_p_size(&one_hot, 0.5, NucleusMode::Standard).unwrap(), 1);
        assert_eq!(
            top_p_entropy(&one_hot, 0.5, NucleusMode::Standard).unwrap(),
            0.0
        );

        let d = dist(&[0.5, 0.3, 0.2]);
        assert_eq!(top_p_size(&d, 0.9, NucleusMode::Standard).unwrap(), 3);
        assert!((top_p_entropy(&d, 0.9, NucleusMode::Standard).unwrap() - 1.029653).abs() < 1e-6);
        assert_eq!(top_p_size(&d, 0.75, NucleusMode::Standard).unwrap(), 2);
        assert!((top_p_entropy(&d, 0.75, NucleusMode::Standard).unwrap() - 0.661563).abs() < 1e-6);
    }

    fn record(dist: TokenDistribution) -> QuestionRecord {
        QuestionRecord::new("q1", dist, vec![0.04, 0.02, 0.01, 0.01]).unwrap()
    }

    #[test]
    fn compute_measures_k1() {
        let cfg = MeasureConfig {
            k_values: vec![1],
            ..MeasureConfig::default()
        };
        let v = compute_measures(&record(dist(&[0.5, 0.3, 0.2])), &cfg).unwrap();
        assert_eq!(v.get(MeasureId::TopKEntropy(1)), Some(0.0));
        assert_eq!(v.get(MeasureId::TopPSize(0.95)), Some(3.0));
    }

    #[test]
    fn compute_measures_names_truncated_k() {
        let listed: Vec<TokenProb> = (0..50).map(|i| TokenProb::new(i, 0.019)).collect();
        let d = TokenDistribution::new(listed, 0.05, 1000, None).unwrap();
        let cfg = MeasureConfig {
            k_values: vec![10, 100],
            p_values: vec![0.9],
            ..MeasureConfig::default()
        };
        let err = compute_measures(&record(d.clone()), &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Truncation {
                request: SubsetRequest::TopK(100),
                ..
            }
        ));
        assert!(err.to_string().contains("k=100"));

        let (v, errors) = compute_measures_partial(&record(d), &cfg).unwrap();
        assert_eq!(errors.len(), 1);
        assert!(v.get(MeasureId::TopKEntropy(10)).is_some());
        assert_eq!(v.get(MeasureId::TopKEntropy(100)), None);
        assert!(v.get(MeasureId::TopPEntropy(0.9)).is_some());
    }

    #[test]
    fn config_validation() {
        assert!(MeasureConfig::default().validate().is_ok());
        let bad = MeasureConfig {
            k_values: vec![10, 5],
            ..MeasureConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MeasureConfig {
            p_values: vec![0.5, 0.9],
            ..MeasureConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn measure_names() {
        let names: Vec<String> = MeasureConfig::default()
            .measure_ids()
            .iter()
            .map(|m| m.to_string())
            .collect();
        assert_eq!(names.len(), 3 + 5 + 4 + 4);
        assert_eq!(names[3], "top_k_entropy_k5");
        assert_eq!(names[8], "top_p_entropy_p0.95");
        assert_eq!(names[15], "top_p_size_p0.5");
        for (id, name) in MeasureConfig::default().measure_ids().iter().zip(&names) {
            assert_eq!(&name.parse::<MeasureId>().unwrap(), id);
        }
        assert!("top_k_entropy_kx".parse::<MeasureId>().is_err());
    }
}

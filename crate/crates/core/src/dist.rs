//! Token probability distributions and the normalized subsets drawn from them.
//!
//! A [`TokenDistribution`] is a truncated next-token distribution: the top-M
//! tokens are listed explicitly and the remainder is summarized by its total
//! mass and token count. Everything downstream (top-k and nucleus subsets,
//! entropies) is computed from the listed head.

use std::cmp::Ordering;

use crate::error::{Error, Result, SubsetRequest};

/// Tolerance on the total mass of a dump, wide enough for half-precision outputs.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Tolerance on the sum of a renormalized subset.
pub const SUBSET_TOLERANCE: f64 = 1e-9;

// Slack on cumulative-sum comparisons so that e.g. 0.7 + 0.2 still reaches 0.9.
const CUMSUM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenProb {
    pub token_id: u64,
    pub prob: f64,
}

impl TokenProb {
    pub fn new(token_id: u64, prob: f64) -> Self {
        Self { token_id, prob }
    }
}

fn canonical_order(a: &TokenProb, b: &TokenProb) -> Ordering {
    b.prob
        .partial_cmp(&a.prob)
        .unwrap_or(Ordering::Equal)
        .then(a.token_id.cmp(&b.token_id))
}

/// A validated, canonically sorted next-token distribution.
///
/// Construct with [`TokenDistribution::new`] (or [`validate`]); entries are
/// always sorted by probability descending with ties broken by token id.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    entries: Vec<TokenProb>,
    tail_mass: f64,
    tail_count: u64,
    exact_total_entropy: Option<f64>,
}

impl TokenDistribution {
    pub fn new(
        entries: Vec<TokenProb>,
        tail_mass: f64,
        tail_count: u64,
        exact_total_entropy: Option<f64>,
    ) -> Result<Self> {
        for e in &entries {
            if !(0.0..=1.0).contains(&e.prob) {
                return Err(Error::Range {
                    what: "token probability",
                    value: e.prob,
                });
            }
        }
        if !(0.0..=1.0).contains(&tail_mass) {
            return Err(Error::Range {
                what: "tail_mass",
                value: tail_mass,
            });
        }
        if let Some(h) = exact_total_entropy {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::Range {
                    what: "exact_total_entropy",
                    value: h,
                });
            }
        }
        let total: f64 = entries.iter().map(|e| e.prob).sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Mass { total });
        }
        if tail_count == 0 && tail_mass > MASS_TOLERANCE {
            return Err(Error::Range {
                what: "tail_mass with tail_count 0",
                value: tail_mass,
            });
        }
        let mut entries = entries;
        entries.sort_by(canonical_order);
        Ok(Self {
            entries,
            tail_mass,
            tail_count,
            exact_total_entropy,
        })
    }

    /// Builds an untruncated distribution with token ids `0..probs.len()`.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        let entries = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| TokenProb::new(i as u64, p))
            .collect();
        Self::new(entries, 0.0, 0, None)
    }

    pub fn entries(&self) -> &[TokenProb] {
        &self.entries
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn tail_count(&self) -> u64 {
        self.tail_count
    }

    pub fn exact_total_entropy(&self) -> Option<f64> {
        self.exact_total_entropy
    }

    pub fn listed_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// True when every vocabulary token is listed.
    pub fn is_full(&self) -> bool {
        self.tail_count == 0
    }

    fn truncation(&self, request: SubsetRequest) -> Error {
        Error::Truncation {
            request,
            listed: self.entries.len(),
            listed_mass: self.listed_mass(),
        }
    }
}

/// Checks every distribution invariant and returns the canonically sorted form.
pub fn validate(dist: TokenDistribution) -> Result<TokenDistribution> {
    let TokenDistribution {
        entries,
        tail_mass,
        tail_count,
        exact_total_entropy,
    } = dist;
    TokenDistribution::new(entries, tail_mass, tail_count, exact_total_entropy)
}

/// Probabilities that sum to one, produced by direct division (never softmax).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSubset {
    probs: Vec<f64>,
    source_size: usize,
}

impl NormalizedSubset {
    /// Wraps probabilities that already sum to one within [`SUBSET_TOLERANCE`].
    pub fn from_normalized(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Degenerate("empty distribution".into()));
        }
        if let Some(&bad) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::Range {
                what: "probability",
                value: bad,
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUBSET_TOLERANCE {
            return Err(Error::Mass { total });
        }
        let source_size = probs.len();
        Ok(Self { probs, source_size })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl AsRef<[f64]> for NormalizedSubset {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

/// Divides every value by the total so relative ratios are preserved exactly.
pub fn renormalize(values: &[f64]) -> Result<NormalizedSubset> {
    if let Some(&bad) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Range {
            what: "unnormalized weight",
            value: bad,
        });
    }
    let total: f64 = values.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return Err(Error::Degenerate(
            "cannot renormalize zero total mass".into(),
        ));
    }
    Ok(NormalizedSubset {
        probs: values.iter().map(|v| v / total).collect(),
        source_size: values.len(),
    })
}

/// Renormalized probabilities of the `k` most probable listed tokens.
pub fn top_k_subset(dist: &TokenDistribution, k: usize) -> Result<NormalizedSubset> {
    if k == 0 {
        return Err(Error::Range {
            what: "k",
            value: 0.0,
        });
    }
    let listed = dist.entries();
    if listed.len() < k {
        return Err(dist.truncation(SubsetRequest::TopK(k)));
    }
    let head: Vec<f64> = listed.iter().take(k).map(|e| e.prob).collect();
    renormalize(&head)
}

/// How the nucleus boundary is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NucleusMode {
    /// Smallest prefix whose cumulative probability reaches `p`.
    #[default]
    Standard,
    /// Largest prefix whose cumulative probability stays below `p` (at least one token).
    Strict,
}

/// Renormalized nucleus (top-p) set of the listed head.
///
/// `source_size` of the result is the number of tokens in the set.
pub fn top_p_set(dist: &TokenDistribution, p: f64, mode: NucleusMode) -> Result<NormalizedSubset> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Range {
            what: "p",
            value: p,
        });
    }
    let listed = dist.entries();
    if listed.is_empty() {
        return Err(Error::Empty);
    }
    if dist.listed_mass() + CUMSUM_SLACK < p {
        return Err(dist.truncation(SubsetRequest::TopP(p)));
    }
    let mut cumsum = 0.0;
    let mut size = 0;
    for entry in listed {
        let next = cumsum + entry.prob;
        match mode {
            NucleusMode::Standard => {
                size += 1;
                if next + CUMSUM_SLACK >= p {
                    break;
                }
            }
            NucleusMode::Strict => {
                if next + CUMSUM_SLACK >= p {
                    break;
                }
                size += 1;
            }
        }
        cumsum = next;
    }
    let size = size.max(1);
    let head: Vec<f64> = listed[..size].iter().map(|e| e.prob).collect();
    renormalize(&head)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(probs: &[f64]) -> TokenDistribution {
        TokenDistribution::from_probs(probs).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn validate_accepts_unit_mass_and_sorts() {
        let d = TokenDistribution::new(
            vec![TokenProb::new(3, 0.4), TokenProb::new(7, 0.6)],
            0.0,
            0,
            None,
        )
        .unwrap();
        assert_eq!(d.entries()[0], TokenProb::new(7, 0.6));
        assert_eq!(d.entries()[1], TokenProb::new(3, 0.4));
    }

    #[test]
    fn validate_rejects_excess_mass() {
        let err = TokenDistribution::new(
            vec![TokenProb::new(1, 0.6), TokenProb::new(2, 0.6)],
            0.0,
            0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Mass { .. }));
    }

    #[test]
    fn validate_accepts_tail() {
        let d = TokenDistribution::new(vec![TokenProb::new(1, 0.5)], 0.5, 100, None).unwrap();
        assert_eq!(d.tail_count(), 100);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let err = TokenDistribution::new(
            vec![TokenProb::new(1, 1.5), TokenProb::new(2, -0.5)],
            0.0,
            0,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
        let err =
            TokenDistribution::new(vec![TokenProb::new(1, f64::NAN)], 0.0, 0, None).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn tail_mass_requires_tail_tokens() {
        let err = TokenDistribution::new(vec![TokenProb::new(1, 0.9)], 0.1, 0, None).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
    }

    #[test]
    fn ties_sort_by_token_id() {
        let d = TokenDistribution::new(
            vec![
                TokenProb::new(9, 0.3),
                TokenProb::new(2, 0.4),
                TokenProb::new(4, 0.3),
            ],
            0.0,
            0,
            None,
        )
        .unwrap();
        let ids: Vec<u64> = d.entries().iter().map(|e| e.token_id).collect();
        assert_eq!(ids, vec![2, 4, 9]);
    }

    #[test]
    fn renormalize_examples() {
        assert!(close(
            renormalize(&[0.2, 0.2]).unwrap().probs(),
            &[0.5, 0.5]
        ));
        assert!(close(
            renormalize(&[0.6, 0.3, 0.1]).unwrap().probs(),
            &[0.6, 0.3, 0.1]
        ));
        // 0.4 / 0.5 and 0.1 / 0.5
        assert!(close(
            renormalize(&[0.4, 0.1]).unwrap().probs(),
            &[0.8, 0.2]
        ));
    }

    #[test]
    fn renormalize_degenerate() {
        assert!(matches!(renormalize(&[]), Err(Error::Degenerate(_))));
        assert!(matches!(
            renormalize(&[0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn top_k_examples() {
        let d = dist(&[0.5, 0.3, 0.2]);
        assert!(close(top_k_subset(&d, 2).unwrap().probs(), &[0.625, 0.375]));
        assert!(close(
            top_k_subset(&dist(&[1.0]), 1).unwrap().probs(),
            &[1.0]
        ));
    }

    #[test]
    fn top_k_boundary_tie_takes_lower_id() {
        let d = TokenDistribution::new(
            vec![
                TokenProb::new(0, 0.4),
                TokenProb::new(8, 0.3),
                TokenProb::new(5, 0.3),
            ],
            0.0,
            0,
            None,
        )
        .unwrap();
        top_k_subset(&d, 2).unwrap();
        assert_eq!(d.entries()[1].token_id, 5);
    }

    #[test]
    fn top_k_truncation() {
        let d = TokenDistribution::new(vec![TokenProb::new(0, 0.5)], 0.5, 10, None).unwrap();
        let err = top_k_subset(&d, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::Truncation {
                request: SubsetRequest::TopK(2),
                ..
            }
        ));
    }

    #[test]
    fn top_p_examples() {
        let d = dist(&[0.5, 0.3, 0.2]);
        let s = top_p_set(&d, 0.75, NucleusMode::Standard).unwrap();
        assert_eq!(s.source_size(), 2);
        assert!(close(s.probs(), &[0.625, 0.375]));

        let s = top_p_set(&d, 0.75, NucleusMode::Strict).unwrap();
        assert_eq!(s.source_size(), 1);

        assert_eq!(
            top_p_set(&d, 0.9, NucleusMode::Standard)
                .unwrap()
                .source_size(),
            3
        );

        let one_hot = dist(&[1.0, 0.0]);
        for p in [0.01, 0.5, 1.0] {
            let s = top_p_set(&one_hot, p, NucleusMode::Standard).unwrap();
            assert_eq!(s.probs(), &[1.0]);
        }
    }

    #[test]
    fn top_p_truncation() {
        let d = TokenDistribution::new(vec![TokenProb::new(0, 0.5)], 0.5, 10, None).unwrap();
        assert!(matches!(
            top_p_set(&d, 0.75, NucleusMode::Standard),
            Err(Error::Truncation { .. })
        ));
        assert_eq!(
            top_p_set(&d, 0.5, NucleusMode::Standard)
                .unwrap()
                .source_size(),
            1
        );
    }
}

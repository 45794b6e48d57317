//! Statistics kernel: entropy, Jensen-Shannon distance, correlation,
//! standardization and hypothesis tests.
//!
//! All logarithms are natural, so entropies are in nats and the largest
//! Jensen-Shannon distance (disjoint supports) is `sqrt(ln 2)`.

mod perm;
mod rng;

pub use perm::{permutation_test, PermutationOutcome};
pub use rng::SeedStream;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const NORMALIZED_TOLERANCE: f64 = 1e-9;

/// Direction in which a test statistic counts as extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    OneSidedGreater,
    OneSidedLess,
    #[default]
    TwoSided,
}

impl Sided {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sided::OneSidedGreater => "one_sided_greater",
            Sided::OneSidedLess => "one_sided_less",
            Sided::TwoSided => "two_sided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sided: Sided,
    /// Zero for analytic tests.
    pub n_resamples: usize,
}

fn check_normalized(probs: &[f64]) -> Result<()> {
    if let Some(&bad) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::Range {
            what: "probability",
            value: bad,
        });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZED_TOLERANCE {
        return Err(Error::Mass { total });
    }
    Ok(())
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats, with `0 log 0 = 0`.
///
/// The input is assumed normalized (see [`crate::dist::NormalizedSubset`]).
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let h = -probs.iter().map(|&p| xlogx(p)).sum::<f64>();
    // -0.0 for one-hot inputs
    h.max(0.0)
}

/// Kullback-Leibler divergence `D(p || q)` in nats. Infinite when `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Length {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            if qi > 0.0 {
                pi * (pi / qi).ln()
            } else {
                f64::INFINITY
            }
        })
        .sum())
}

/// Jensen-Shannon distance: the square root of the mean KL divergence to the mixture.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Length {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_normalized(p)?;
    check_normalized(q)?;
    let mut divergence = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        let term = |x: f64| if x > 0.0 { x * (x / mi).ln() } else { 0.0 };
        // a + b == b + a in floating point, so jsd(p, q) == jsd(q, p) bit for bit.
        divergence += 0.5 * (term(pi) + term(qi));
    }
    Ok(divergence.max(0.0).sqrt())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Length {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::Length {
            expected: 3,
            got: x.len(),
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with tied values sharing the mean of their positions.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson over mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Length {
            expected: x.len(),
            got: y.len(),
        });
    }
    pearson(&mid_ranks(x), &mid_ranks(y))
}

/// Rescales to mean 0 and population standard deviation 1.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Length {
            expected: 2,
            got: values.len(),
        });
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    if var <= 0.0 || values.iter().all(|&v| v == values[0]) {
        return Err(Error::Degenerate(
            "cannot standardize a constant vector".into(),
        ));
    }
    let sd = var.sqrt();
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

/// Whether the normal approximation behind [`one_proportion_ztest`] is reasonable.
pub fn normal_approximation_ok(n: u64, p0: f64) -> bool {
    let n = n as f64;
    n * p0 >= 5.0 && n * (1.0 - p0) >= 5.0
}

/// One-sided (greater) one-proportion z-test of `successes / n` against `p0`.
pub fn one_proportion_ztest(successes: u64, n: u64, p0: f64) -> Result<TestResult> {
    if n == 0 {
        return Err(Error::Range {
            what: "n",
            value: 0.0,
        });
    }
    if successes > n {
        return Err(Error::Range {
            what: "successes",
            value: successes as f64,
        });
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Range {
            what: "p0",
            value: p0,
        });
    }
    if !normal_approximation_ok(n, p0) {
        log::warn!("z-test normal approximation is poor: n={n}, p0={p0}");
    }
    let p_hat = successes as f64 / n as f64;
    let z = (p_hat - p0) / (p0 * (1.0 - p0) / n as f64).sqrt();
    let normal = Normal::standard();
    Ok(TestResult {
        statistic: z,
        p_value: normal.sf(z).clamp(0.0, 1.0),
        sided: Sided::OneSidedGreater,
        n_resamples: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert!((shannon_entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(shannon_entropy(&[1.0]), 0.0);
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0]), 0.0);
        // -(0.5 ln 0.5 + 0.3 ln 0.3 + 0.2 ln 0.2)
        assert!((shannon_entropy(&[0.5, 0.3, 0.2]) - 1.029653).abs() < 1e-6);
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let max = jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((max - 2f64.ln().sqrt()).abs() < 1e-12);
        assert!((max - 0.832555).abs() < 1e-6);

        // Oracle: mixture M = [0.5, 0.5], KL computed separately.
        let p = [0.75, 0.25];
        let q = [0.25, 0.75];
        let m = [0.5, 0.5];
        let expected =
            (0.5 * kl_divergence(&p, &m).unwrap() + 0.5 * kl_divergence(&q, &m).unwrap()).sqrt();
        assert!((jsd(&p, &q).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.361679).abs() < 1e-6);
    }

    #[test]
    fn jsd_length_mismatch() {
        assert!(matches!(
            jsd(&[1.0], &[0.5, 0.5]),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[1.0; 10]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 8.0, 27.0, 64.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);

        // binary ranks: [3.5, 3.5, 1.5, 1.5] vs [1, 2, 4, 3]
        let correct = [1.0, 1.0, 0.0, 0.0];
        let unc = [0.1, 0.2, 0.9, 0.8];
        let rho = spearman(&correct, &unc).unwrap();
        let oracle = {
            let a = [1.0, 1.0, -1.0, -1.0];
            let b = [-1.5, -0.5, 1.5, 0.5];
            let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let saa: f64 = a.iter().map(|x| x * x).sum();
            let sbb: f64 = b.iter().map(|x| x * x).sum();
            sab / (saa * sbb).sqrt()
        };
        assert!((rho - oracle).abs() < 1e-12);
        assert!(rho < -0.89);

        assert!(matches!(
            spearman(&[2.0; 4], &unc),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(
            mid_ranks(&[10.0, 20.0, 10.0, 30.0]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
    }

    #[test]
    fn standardize_examples() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        let s = 1.5f64.sqrt();
        for (a, b) in z.iter().zip([-s, 0.0, s]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((z[0] + 1.224745).abs() < 1e-6);
        let again = standardize(&z).unwrap();
        for (a, b) in z.iter().zip(&again) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(matches!(standardize(&[5.0; 3]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ztest_examples() {
        let r = one_proportion_ztest(50, 100, 0.5).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.5).abs() < 1e-12);

        let r = one_proportion_ztest(1280, 2998, 0.265).unwrap();
        let oracle_z = (1280.0 / 2998.0 - 0.265) / (0.265f64 * 0.735 / 2998.0).sqrt();
        assert!((r.statistic - oracle_z).abs() < 1e-12);
        assert!(r.statistic > 19.0);
        assert!(r.p_value < 0.01);

        let r = one_proportion_ztest(0, 100, 0.5).unwrap();
        assert!(r.statistic < -9.0);
        assert!(r.p_value > 0.999_999);

        assert!(one_proportion_ztest(5, 4, 0.5).is_err());
        assert!(one_proportion_ztest(1, 4, 1.0).is_err());
    }
}

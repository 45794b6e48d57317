//! Built-in invariant checks over bundled fixtures.
//!
//! Runs without any external data so an installed binary can confirm the
//! numerics behave as documented.

use rand::Rng;

use crate::alignment::{kendall_distance, Ranking};
use crate::dist::TokenDistribution;
use crate::ingest::survey::{clean_question, CleaningOutcome};
use crate::ingest::{parse_dump, read_survey_csv};
use crate::measures::{
    choice_entropy, compute_measures_partial, top_k_entropy, total_entropy, MeasureConfig,
};
use crate::stats::{jsd, one_proportion_ztest, permutation_test, SeedStream, Sided};

pub const GOLDEN_DUMP: &str = include_str!("../fixtures/golden_dump.jsonl");
pub const SURVEY_CORPUS: &str = include_str!("../fixtures/survey_corpus.csv");
pub const SURVEY_EXPECTED: &str = include_str!("../fixtures/survey_corpus.expected.csv");

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<(), String>;
type NamedCheck = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn run_all() -> Vec<Check> {
    let checks: [NamedCheck; 7] = [
        ("entropy_identities", entropy_identities),
        ("jsd_metric", jsd_metric),
        ("kendall_bruteforce", kendall_bruteforce),
        ("golden_dump", golden_dump),
        ("survey_cleaning", survey_cleaning),
        ("permutation_bound", permutation_bound),
        ("ztest_null", ztest_null),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let result = f();
            Check {
                name,
                passed: result.is_ok(),
                detail: result.err().unwrap_or_default(),
            }
        })
        .collect()
}

fn entropy_identities() -> Outcome {
    for n in 2..=26usize {
        let uniform = vec![1.0 / n as f64; n];
        let dist = TokenDistribution::from_probs(&uniform).map_err(|e| e.to_string())?;
        let expected = (n as f64).ln();
        let got = [
            total_entropy(&dist),
            top_k_entropy(&dist, n).map_err(|e| e.to_string())?,
            choice_entropy(&uniform).map_err(|e| e.to_string())?,
        ];
        ensure(got.iter().all(|h| (h - expected).abs() <= 1e-12), || {
            format!("n={n}: {got:?} vs ln n = {expected}")
        })?;
        let mut one_hot = vec![0.0; n];
        one_hot[0] = 1.0;
        let h = choice_entropy(&one_hot).map_err(|e| e.to_string())?;
        ensure(h.abs() <= 1e-12, || format!("n={n}: one-hot entropy {h}"))?;
    }
    Ok(())
}

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn jsd_metric() -> Outcome {
    let mut rng = SeedStream::default().stream("selfcheck/jsd", 0);
    let d = |a: &[f64], b: &[f64]| jsd(a, b).map_err(|e| e.to_string());
    for i in 0..1000 {
        let n = rng.random_range(2..=8usize);
        let (p, q, r) = (
            random_simplex(&mut rng, n),
            random_simplex(&mut rng, n),
            random_simplex(&mut rng, n),
        );
        let (pq, qp, pr, qr) = (d(&p, &q)?, d(&q, &p)?, d(&p, &r)?, d(&q, &r)?);
        ensure((pq - qp).abs() <= 1e-12, || {
            format!("triple {i}: asymmetric")
        })?;
        ensure(d(&p, &p)? <= 1e-12, || format!("triple {i}: self-distance"))?;
        ensure(pr <= pq + qr + 1e-12, || {
            format!("triple {i}: triangle inequality")
        })?;
    }
    let max = d(&[1.0, 0.0], &[0.0, 1.0])?;
    ensure((max - 2f64.ln().sqrt()).abs() <= 1e-9, || {
        format!("disjoint JSD {max}")
    })
}

/// Kendall distance against an explicit count of discordant pairs.
fn kendall_bruteforce() -> Outcome {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    for n in 2..=4usize {
        for a in permutations(n) {
            for b in permutations(n) {
                let pos = |order: &[usize]| {
                    let mut at = vec![0; n];
                    for (i, &item) in order.iter().enumerate() {
                        at[item] = i;
                    }
                    at
                };
                let (pa, pb) = (pos(&a), pos(&b));
                let mut discordant = 0usize;
                for i in 0..n {
                    for j in i + 1..n {
                        if (pa[i] < pa[j]) != (pb[i] < pb[j]) {
                            discordant += 1;
                        }
                    }
                }
                let expected = discordant as f64 / (n * (n - 1) / 2) as f64;
                let got = kendall_distance(
                    &Ranking::from_order(a.clone()),
                    &Ranking::from_order(b.clone()),
                )
                .map_err(|e| e.to_string())?;
                ensure(got == Some(expected), || {
                    format!("{a:?} vs {b:?}: {got:?} != {expected}")
                })?;
            }
        }
    }
    Ok(())
}

fn golden_dump() -> Outcome {
    let file = parse_dump(GOLDEN_DUMP.as_bytes(), false).map_err(|e| e.to_string())?;
    ensure(file.header.is_some() && file.records.len() == 3, || {
        "expected header and 3 records".into()
    })?;
    let records = file.question_records().map_err(|e| e.to_string())?;
    let cfg = MeasureConfig {
        k_values: vec![2, 3, 5],
        p_values: vec![0.9, 0.5],
        ..MeasureConfig::default()
    };
    let (g1, errors) = compute_measures_partial(&records[0], &cfg).map_err(|e| e.to_string())?;
    ensure(errors.is_empty(), || {
        format!("full record produced errors: {errors:?}")
    })?;
    ensure(
        (g1.total_entropy - 1.333074293476779).abs() <= 1e-12,
        || format!("g1 total entropy {}", g1.total_entropy),
    )?;
    let (_, errors) = compute_measures_partial(&records[1], &cfg).map_err(|e| e.to_string())?;
    ensure(errors.len() == 2, || {
        format!("g2 should report 2 truncated cells, got {errors:?}")
    })
}

fn survey_cleaning() -> Outcome {
    let raw = read_survey_csv(SURVEY_CORPUS.as_bytes()).map_err(|e| e.to_string())?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(SURVEY_EXPECTED.as_bytes());
    let mut expected = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        expected.push((
            row[0].to_string(),
            row[1].to_string(),
            row[2].parse::<usize>().map_err(|e| e.to_string())?,
        ));
    }
    ensure(raw.len() == expected.len(), || {
        format!("{} questions vs {} expectations", raw.len(), expected.len())
    })?;
    for (q, (id, outcome, removed)) in raw.iter().zip(&expected) {
        let (got, got_removed, _) = clean_question(q);
        let got = match got {
            CleaningOutcome::Kept => "kept",
            CleaningOutcome::DroppedTooFewChoices => "dropped_lt2_choices",
            CleaningOutcome::DroppedInvalidSum => "dropped_invalid_sum",
        };
        ensure(
            &q.question_id == id && got == outcome && got_removed == *removed,
            || {
                format!(
                    "{}: got ({got}, {got_removed}), expected ({outcome}, {removed})",
                    q.question_id
                )
            },
        )?;
    }
    Ok(())
}

fn permutation_bound() -> Outcome {
    let out = permutation_test(
        10.0,
        |_| 0.0,
        99,
        &SeedStream::default(),
        Sided::OneSidedGreater,
    );
    let p = out.result.p_value;
    ensure((p - 0.01).abs() <= 1e-15, || {
        format!("p = {p}, expected 1/100")
    })
}

fn ztest_null() -> Outcome {
    let t = one_proportion_ztest(250, 1000, 0.25).map_err(|e| e.to_string())?;
    ensure((t.p_value - 0.5).abs() <= 1e-9, || {
        format!("p = {}", t.p_value)
    })
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

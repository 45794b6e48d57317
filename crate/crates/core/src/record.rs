//! One question as seen by the analyses: the model's next-token distribution,
//! its answer-label probabilities and whatever ground truth is attached.

use crate::dist::TokenDistribution;
use crate::error::{Error, Result};

/// Largest supported choice count: one capital letter per choice.
pub const MAX_CHOICES: usize = 26;

/// Capital letter label for a 0-based choice index.
pub fn label(index: usize) -> String {
    assert!(
        index < MAX_CHOICES,
        "choice index {index} has no letter label"
    );
    char::from(b'A' + index as u8).to_string()
}

/// 0-based choice index for a capital letter label.
pub fn label_index(label: &str) -> Option<usize> {
    match label.as_bytes() {
        [c @ b'A'..=b'Z'] => Some((c - b'A') as usize),
        _ => None,
    }
}

/// Index of the largest value; ties go to the lowest index (alphabetically first label).
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionRecord {
    pub question_id: String,
    pub dist: TokenDistribution,
    /// Raw label-token probabilities in label order `A, B, ...`.
    pub choice_probs: Vec<f64>,
    /// Index of the model's cloze-test answer.
    pub chosen: usize,
    pub correct: Option<usize>,
    pub subject: Option<String>,
    /// Normalized human response distribution in label order.
    pub human_ratios: Option<Vec<f64>>,
}

impl QuestionRecord {
    /// Builds a record whose chosen answer is the argmax of `choice_probs`.
    pub fn new(
        question_id: impl Into<String>,
        dist: TokenDistribution,
        choice_probs: Vec<f64>,
    ) -> Result<Self> {
        let n = choice_probs.len();
        if !(2..=MAX_CHOICES).contains(&n) {
            return Err(Error::Range {
                what: "choice count",
                value: n as f64,
            });
        }
        let chosen = argmax(&choice_probs).expect("non-empty");
        Ok(Self {
            question_id: question_id.into(),
            dist,
            choice_probs,
            chosen,
            correct: None,
            subject: None,
            human_ratios: None,
        })
    }

    pub fn with_correct(mut self, correct: usize) -> Self {
        self.correct = Some(correct);
        self
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn with_human_ratios(mut self, ratios: Vec<f64>) -> Self {
        self.human_ratios = Some(ratios);
        self
    }

    pub fn choice_count(&self) -> usize {
        self.choice_probs.len()
    }

    pub fn is_correct(&self) -> Option<bool> {
        self.correct.map(|c| c == self.chosen)
    }
}

//! Contradiction recognition: automatic scoring of inquiry pairs and
//! aggregation of human votes.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::backends::{BackendError, NliBackend};
use crate::model::{Dialogue, InquiryPair, Judgment, JudgmentSource, Vote};

/// Decision threshold `tau` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub const DEFAULT: f64 = 0.15;

    pub fn new(tau: f64) -> Result<Self, RecognitionError> {
        if (0.0..1.0).contains(&tau) {
            Ok(Self(tau))
        } else {
            Err(RecognitionError::Argument(format!("tau {tau} outside [0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `score > tau`, strictly.
    pub fn decide(self, score: f64) -> bool {
        score > self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("scoring {dialogue_id} turn {turn_k}: {source}")]
    Backend {
        dialogue_id: String,
        turn_k: u32,
        #[source]
        source: BackendError,
    },
}

/// Scores one inquiry pair with premise `u_2k` and hypothesis `r_k`.
pub fn judge_auto(
    dialogue_id: &str,
    pair: &InquiryPair,
    nli: &dyn NliBackend,
    threshold: Threshold,
) -> Result<Judgment, RecognitionError> {
    let score = nli
        .contradiction(&pair.source.text, &pair.response.text)
        .map_err(|source| RecognitionError::Backend {
            dialogue_id: dialogue_id.to_string(),
            turn_k: pair.turn_k,
            source,
        })?;
    if !(0.0..=1.0).contains(&score) {
        return Err(RecognitionError::Backend {
            dialogue_id: dialogue_id.to_string(),
            turn_k: pair.turn_k,
            source: BackendError::Protocol {
                endpoint: nli.identity().to_string(),
                message: format!("score {score} outside [0, 1]"),
            },
        });
    }
    Ok(Judgment::auto(dialogue_id, pair.turn_k, score, threshold.value()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unscored {
    pub dialogue_id: String,
    pub turn_k: u32,
    pub error: String,
}

/// Judgments for a batch of dialogues plus the pairs that could not be
/// scored. Unscored pairs are left out of every rate.
#[derive(Debug, Clone, Default)]
pub struct JudgedBatch {
    pub judgments: Vec<Judgment>,
    pub unscored: Vec<Unscored>,
}

impl JudgedBatch {
    /// Fraction of inquiry pairs that were scored.
    pub fn coverage(&self) -> f64 {
        let total = self.judgments.len() + self.unscored.len();
        if total == 0 {
            1.0
        } else {
            self.judgments.len() as f64 / total as f64
        }
    }
}

/// Scores every inquiry pair of every dialogue, in parallel. Output order
/// follows the input order.
pub fn judge_dialogues(dialogues: &[Dialogue], nli: &dyn NliBackend, threshold: Threshold) -> JudgedBatch {
    let items: Vec<(&str, &InquiryPair)> = dialogues
        .iter()
        .flat_map(|d| d.inquiries.iter().map(move |p| (d.dialogue_id.as_str(), p)))
        .collect();
    let results: Vec<_> = items
        .par_iter()
        .map(|(id, pair)| judge_auto(id, pair, nli, threshold))
        .collect();
    let mut batch = JudgedBatch::default();
    for ((id, pair), r) in items.into_iter().zip(results) {
        match r {
            Ok(j) => batch.judgments.push(j),
            Err(e) => batch.unscored.push(Unscored {
                dialogue_id: id.to_string(),
                turn_k: pair.turn_k,
                error: e.to_string(),
            }),
        }
    }
    batch
}

/// Majority decision over an odd number (at least three) of annotator votes.
pub fn aggregate_votes(dialogue_id: &str, turn_k: u32, votes: Vec<Vote>) -> Result<Judgment, RecognitionError> {
    if votes.len() < 3 || votes.len().is_multiple_of(2) {
        return Err(RecognitionError::Argument(format!(
            "need an odd number of at least 3 votes, got {}",
            votes.len()
        )));
    }
    let annotators: BTreeSet<&str> = votes.iter().map(|v| v.annotator.as_str()).collect();
    if annotators.len() != votes.len() {
        return Err(RecognitionError::Argument("duplicate annotator".into()));
    }
    if let Some(v) = votes.iter().find(|v| v.label > 1) {
        return Err(RecognitionError::Argument(format!("label {} not in {{0, 1}}", v.label)));
    }
    let positives = votes.iter().filter(|v| v.label == 1).count();
    Ok(Judgment {
        dialogue_id: dialogue_id.to_string(),
        turn_k,
        score: None,
        contradiction: 2 * positives > votes.len(),
        tau: None,
        source: JudgmentSource::Human,
        votes: Some(votes),
    })
}

/// Number of automatic judgments flagged at `tau`, from stored scores.
pub fn count_at(judgments: &[Judgment], tau: f64) -> usize {
    judgments
        .iter()
        .filter_map(|j| j.score)
        .filter(|&s| s > tau)
        .count()
}

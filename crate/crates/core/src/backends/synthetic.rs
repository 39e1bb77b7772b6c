//! Monte Carlo chatbot with a configurable contradiction probability.

use rand::{Rng, RngCore};

use super::{BackendError, ChatBackend};
use crate::model::{GenerationConfig, Role, Utterance};

const STATEMENT_TEMPLATES: &[&str] = &[
    "I really like {}.",
    "My favorite thing is {}.",
    "I have been thinking about {} lately.",
    "Honestly, {} is great.",
];

/// Phrase prefix of a negating inquiry reply.
pub const NEGATION_MARKER: &str = "I did not say that about";

const RESTATEMENT_PREFIX: &str = "As I said,";

/// Every natural utterance states something about one vocabulary entity.
/// Asked about its latest statement, the bot denies it with probability
/// `contradiction_prob` ("I did not say that about E.") and otherwise
/// restates it verbatim.
#[derive(Debug, Clone)]
pub struct SyntheticContradictorBot {
    name: String,
    contradiction_prob: f64,
    entity_vocab: Vec<String>,
}

impl SyntheticContradictorBot {
    pub fn new(name: impl Into<String>, contradiction_prob: f64, entity_vocab: Vec<String>) -> Result<Self, BackendError> {
        if !(0.0..=1.0).contains(&contradiction_prob) {
            return Err(BackendError::Argument("contradiction_prob must lie in [0, 1]".into()));
        }
        if entity_vocab.is_empty() || entity_vocab.iter().any(|e| e.trim().is_empty()) {
            return Err(BackendError::Argument("entity vocabulary must be nonempty".into()));
        }
        Ok(Self {
            name: name.into(),
            contradiction_prob,
            entity_vocab,
        })
    }

    pub fn contradiction_prob(&self) -> f64 {
        self.contradiction_prob
    }

    /// Whether `reply` is a negating inquiry answer.
    pub fn is_negation(reply: &str) -> bool {
        reply.starts_with(NEGATION_MARKER)
    }

    fn entity_in<'a>(&'a self, statement: &str) -> Option<&'a str> {
        self.entity_vocab
            .iter()
            .filter(|e| statement.contains(e.as_str()))
            .max_by_key(|e| e.len())
            .map(String::as_str)
    }
}

impl ChatBackend for SyntheticContradictorBot {
    fn identity(&self) -> &str {
        &self.name
    }

    fn generate(
        &self,
        history: &[Utterance],
        _cfg: &GenerationConfig,
        rng: &mut dyn RngCore,
    ) -> Result<String, BackendError> {
        if history.last().is_some_and(|u| u.speaker == Role::Inquirer) {
            let statement = history
                .iter()
                .rev()
                .find(|u| u.speaker == Role::Bot2)
                .ok_or_else(|| BackendError::Argument("inquiry without a prior bot2 statement".into()))?;
            let negate = rng.random_bool(self.contradiction_prob);
            return Ok(match self.entity_in(&statement.text) {
                Some(entity) if negate => format!("{NEGATION_MARKER} {entity}."),
                _ if negate => format!("{NEGATION_MARKER} that."),
                _ => format!("{RESTATEMENT_PREFIX} {}", statement.text),
            });
        }
        let entity = &self.entity_vocab[rng.random_range(0..self.entity_vocab.len())];
        let template = STATEMENT_TEMPLATES[rng.random_range(0..STATEMENT_TEMPLATES.len())];
        Ok(template.replace("{}", entity))
    }
}

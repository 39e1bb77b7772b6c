//! The inquirer agent: turns a Chatbot2 utterance into one question about an
//! entity it mentions.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::backends::{BackendError, NerBackend, QuestionBackend};
use crate::model::{Entity, Role, Utterance, UtteranceKind};

/// Entities found in `u_2k`, one candidate question per entity, and the index
/// of the question to ask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InquiryDraft {
    pub entities: Vec<Entity>,
    pub candidates: Vec<String>,
    pub selected_index: usize,
}

impl InquiryDraft {
    pub fn question(&self) -> &str {
        &self.candidates[self.selected_index]
    }
}

/// Extracts entities from `u2k`, generates one question per distinct entity
/// and picks one uniformly with `rng`.
///
/// Returns `Ok(None)` when no entity is found or every question generation
/// fails. Duplicate `(surface, label)` mentions are asked about once.
/// Entity extraction errors propagate.
pub fn make_inquiry(
    u2k: &Utterance,
    ner: &dyn NerBackend,
    qg: &dyn QuestionBackend,
    rng: &mut dyn RngCore,
) -> Result<Option<InquiryDraft>, BackendError> {
    if u2k.speaker != Role::Bot2 || u2k.kind != UtteranceKind::Natural {
        return Err(BackendError::Argument("inquiries target Chatbot2 natural utterances".into()));
    }
    let mut seen = HashSet::new();
    let mut entities = Vec::new();
    let mut candidates = Vec::new();
    for entity in ner.extract(&u2k.text)? {
        if !seen.insert((entity.surface.clone(), entity.label)) {
            continue;
        }
        match qg.question(&u2k.text, &entity) {
            Ok(q) if !q.trim().is_empty() => {
                entities.push(entity);
                candidates.push(q);
            }
            Ok(_) => tracing::warn!(entity = %entity.surface, "empty generated question, entity dropped"),
            Err(e) => tracing::warn!(entity = %entity.surface, error = %e, "question generation failed, entity dropped"),
        }
    }
    if candidates.is_empty() {
        return Ok(None);
    }
    let selected_index = rng.random_range(0..candidates.len());
    Ok(Some(InquiryDraft {
        entities,
        candidates,
        selected_index,
    }))
}

/// Entity extractor plus question generator, shareable across threads.
#[derive(Clone)]
pub struct Inquirer {
    pub ner: Arc<dyn NerBackend>,
    pub qg: Arc<dyn QuestionBackend>,
}

impl Inquirer {
    pub fn new(ner: Arc<dyn NerBackend>, qg: Arc<dyn QuestionBackend>) -> Self {
        Self { ner, qg }
    }

    /// Gazetteer NER with template questions.
    pub fn builtin() -> Self {
        Self::new(
            Arc::new(crate::backends::GazetteerNer::default()),
            Arc::new(crate::backends::TemplateQuestions),
        )
    }

    pub fn inquire(&self, u2k: &Utterance, rng: &mut dyn RngCore) -> Result<Option<InquiryDraft>, BackendError> {
        make_inquiry(u2k, self.ner.as_ref(), self.qg.as_ref(), rng)
    }
}

impl std::fmt::Debug for Inquirer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Inquirer")
            .field("ner", &self.ner.identity())
            .field("qg", &self.qg.identity())
            .finish()
    }
}

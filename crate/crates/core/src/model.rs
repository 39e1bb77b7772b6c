//! Domain data model: bots, utterances, entities, inquiry pairs, dialogues
//! and judgments.
//!
//! Every type here is an immutable value object. Structural rules that span
//! several fields (speaker alternation, inquiry placement, the threshold rule
//! for automatic judgments, ...) are checked by [`validate_dialogue`] and
//! [`validate_judgment`], which report every violation rather than the first.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Short identifier of a chatbot in the pool, e.g. `"BL"` or `"PL"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BotId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bot id must be nonempty")]
pub struct EmptyBotId;

impl BotId {
    pub fn new(id: impl Into<String>) -> Result<Self, EmptyBotId> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(EmptyBotId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for BotId {
    type Error = EmptyBotId;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<BotId> for String {
    fn from(id: BotId) -> Self {
        id.0
    }
}

impl FromStr for BotId {
    type Err = EmptyBotId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for BotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Who produced an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Bot1,
    Bot2,
    Inquirer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Bot1 => "bot1",
            Role::Bot2 => "bot2",
            Role::Inquirer => "inquirer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceKind {
    Natural,
    InquiryQuestion,
    InquiryResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Role,
    pub kind: UtteranceKind,
    /// Conversation turn `k`, starting at 1. Both natural utterances of a
    /// turn share the same index.
    pub turn_index: u32,
    pub text: String,
}

impl Utterance {
    /// Builds an utterance, applying NFC normalization to the text.
    pub fn new(speaker: Role, kind: UtteranceKind, turn_index: u32, text: &str) -> Self {
        Self {
            speaker,
            kind,
            turn_index,
            text: text.nfc().collect(),
        }
    }

    pub fn natural(speaker: Role, turn_index: u32, text: &str) -> Self {
        Self::new(speaker, UtteranceKind::Natural, turn_index, text)
    }

    pub fn question(turn_index: u32, text: &str) -> Self {
        Self::new(Role::Inquirer, UtteranceKind::InquiryQuestion, turn_index, text)
    }

    pub fn response(turn_index: u32, text: &str) -> Self {
        Self::new(Role::Bot2, UtteranceKind::InquiryResponse, turn_index, text)
    }
}

/// The 18 OntoNotes named-entity types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityLabel {
    Person,
    Norp,
    Fac,
    Org,
    Gpe,
    Loc,
    Product,
    Event,
    WorkOfArt,
    Law,
    Language,
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 18] = [
        EntityLabel::Person,
        EntityLabel::Norp,
        EntityLabel::Fac,
        EntityLabel::Org,
        EntityLabel::Gpe,
        EntityLabel::Loc,
        EntityLabel::Product,
        EntityLabel::Event,
        EntityLabel::WorkOfArt,
        EntityLabel::Law,
        EntityLabel::Language,
        EntityLabel::Date,
        EntityLabel::Time,
        EntityLabel::Percent,
        EntityLabel::Money,
        EntityLabel::Quantity,
        EntityLabel::Ordinal,
        EntityLabel::Cardinal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::Person => "PERSON",
            EntityLabel::Norp => "NORP",
            EntityLabel::Fac => "FAC",
            EntityLabel::Org => "ORG",
            EntityLabel::Gpe => "GPE",
            EntityLabel::Loc => "LOC",
            EntityLabel::Product => "PRODUCT",
            EntityLabel::Event => "EVENT",
            EntityLabel::WorkOfArt => "WORK_OF_ART",
            EntityLabel::Law => "LAW",
            EntityLabel::Language => "LANGUAGE",
            EntityLabel::Date => "DATE",
            EntityLabel::Time => "TIME",
            EntityLabel::Percent => "PERCENT",
            EntityLabel::Money => "MONEY",
            EntityLabel::Quantity => "QUANTITY",
            EntityLabel::Ordinal => "ORDINAL",
            EntityLabel::Cardinal => "CARDINAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown entity label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for EntityLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named entity found in an utterance. `start..end` is a half-open range of
/// character (Unicode scalar) offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub surface: String,
    pub label: EntityLabel,
    pub start: usize,
    pub end: usize,
}

impl Entity {
    /// Whether the span lies inside `text` and slices exactly to `surface`.
    pub fn is_anchored_in(&self, text: &str) -> bool {
        char_slice(text, self.start, self.end).is_some_and(|s| s == self.surface)
    }
}

/// Slices `text` by character offsets. `None` if the range is out of bounds
/// or inverted.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

/// One inserted inquiry: the Chatbot2 utterance `u_2k` it interrogates, the
/// entities found there, the candidate questions, the question asked and the
/// answer given in the forked context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InquiryPair {
    pub turn_k: u32,
    pub source: Utterance,
    pub entities: Vec<Entity>,
    pub candidates: Vec<String>,
    pub question: Utterance,
    pub response: Utterance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Number of conversation turns `K`.
    pub max_turns: u32,
    /// Nucleus sampling mass forwarded to chat backends.
    pub nucleus_p: f64,
    pub campaign_seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_turns: 15,
            nucleus_p: 0.9,
            campaign_seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.max_turns < 1 {
            out.push(Violation::MaxTurns);
        }
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            out.push(Violation::NucleusP);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub bot1: BotId,
    pub bot2: BotId,
    /// Natural utterances only, in speaking order.
    pub turns: Vec<Utterance>,
    /// Side-channel inquiries, ordered by `turn_k`.
    pub inquiries: Vec<InquiryPair>,
    pub seed: u64,
    pub config: GenerationConfig,
}

impl Dialogue {
    /// The Chatbot2 natural utterance of turn `k`, if any.
    pub fn bot2_turn(&self, k: u32) -> Option<&Utterance> {
        self.turns
            .iter()
            .find(|u| u.turn_index == k && u.speaker == Role::Bot2)
    }

    /// Natural turns with inquiry questions and answers interleaved after the
    /// Chatbot2 utterance they interrogate. For display only.
    pub fn interleaved(&self) -> Vec<&Utterance> {
        let mut out = Vec::with_capacity(self.turns.len() + 2 * self.inquiries.len());
        for u in &self.turns {
            out.push(u);
            if u.speaker == Role::Bot2 {
                if let Some(inq) = self.inquiries.iter().find(|p| p.turn_k == u.turn_index) {
                    out.push(&inq.question);
                    out.push(&inq.response);
                }
            }
        }
        out
    }
}

/// A violated structural rule.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("empty bot id")]
    EmptyBotId,
    #[error("max_turns must be at least 1")]
    MaxTurns,
    #[error("nucleus_p must lie in (0, 1]")]
    NucleusP,
    #[error("speaker alternation")]
    SpeakerAlternation,
    #[error("turn index mismatch at utterance {position}")]
    TurnIndex { position: usize },
    #[error("too many natural turns")]
    TooManyTurns,
    #[error("empty utterance text at {0}")]
    EmptyText(String),
    #[error("utterance kind/speaker mismatch at {0}")]
    KindSpeaker(String),
    #[error("inquiry at turn {0} does not reference a bot2 natural turn")]
    InquirySource(u32),
    #[error("duplicate inquiry turn")]
    DuplicateInquiryTurn,
    #[error("too many inquiries")]
    TooManyInquiries,
    #[error("inquiry at turn {0} has no entities")]
    NoEntities(u32),
    #[error("inquiry at turn {0} has no candidate questions")]
    NoCandidates(u32),
    #[error("inquiry at turn {0}: question is not among the candidates")]
    QuestionNotCandidate(u32),
    #[error("inquiry at turn {0}: entity span does not match source text")]
    EntitySpan(u32),
    #[error("inquiry at turn {0}: utterance turn index differs from turn_k")]
    InquiryTurnIndex(u32),
    #[error("inquiry text leaked into natural turns")]
    InquiryLeak,
    #[error("automatic judgment without score")]
    MissingScore,
    #[error("automatic judgment without tau")]
    MissingTau,
    #[error("score outside [0, 1]")]
    ScoreRange,
    #[error("tau outside [0, 1)")]
    TauRange,
    #[error("contradiction flag disagrees with score > tau")]
    ThresholdRule,
    #[error("automatic judgment carries votes")]
    AutoWithVotes,
    #[error("human judgment needs an odd number of at least 3 votes")]
    VoteCount,
    #[error("human judgment has duplicate annotators")]
    DuplicateAnnotator,
    #[error("human judgment carries a score or tau")]
    HumanWithScore,
    #[error("contradiction flag disagrees with vote majority")]
    MajorityRule,
}

/// Checks every structural rule of a dialogue and returns all violations.
pub fn validate_dialogue(d: &Dialogue) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.bot1.as_str().trim().is_empty() || d.bot2.as_str().trim().is_empty() {
        out.push(Violation::EmptyBotId);
    }
    out.extend(d.config.violations());

    let mut alternation_broken = false;
    for (pos, u) in d.turns.iter().enumerate() {
        let expected = if pos % 2 == 0 { Role::Bot1 } else { Role::Bot2 };
        if u.speaker != expected && !alternation_broken {
            alternation_broken = true;
            out.push(Violation::SpeakerAlternation);
        }
        if u.turn_index as usize != pos / 2 + 1 {
            out.push(Violation::TurnIndex { position: pos });
        }
        if u.kind != UtteranceKind::Natural || u.speaker == Role::Inquirer {
            out.push(Violation::KindSpeaker(format!("natural turn {pos}")));
        }
        if u.text.trim().is_empty() {
            out.push(Violation::EmptyText(format!("natural turn {pos}")));
        }
    }
    if d.turns.len() as u64 > 2 * d.config.max_turns as u64 {
        out.push(Violation::TooManyTurns);
    }
    if d.inquiries.len() as u64 > d.config.max_turns as u64 {
        out.push(Violation::TooManyInquiries);
    }

    let mut seen = BTreeSet::new();
    let mut duplicate_reported = false;
    for inq in &d.inquiries {
        let k = inq.turn_k;
        if !seen.insert(k) && !duplicate_reported {
            duplicate_reported = true;
            out.push(Violation::DuplicateInquiryTurn);
        }
        match d.bot2_turn(k) {
            Some(src) if *src == inq.source => {}
            _ => out.push(Violation::InquirySource(k)),
        }
        if inq.source.kind != UtteranceKind::Natural || inq.source.speaker != Role::Bot2 {
            out.push(Violation::KindSpeaker(format!("inquiry {k} source")));
        }
        if inq.question.kind != UtteranceKind::InquiryQuestion || inq.question.speaker != Role::Inquirer {
            out.push(Violation::KindSpeaker(format!("inquiry {k} question")));
        }
        if inq.response.kind != UtteranceKind::InquiryResponse || inq.response.speaker != Role::Bot2 {
            out.push(Violation::KindSpeaker(format!("inquiry {k} response")));
        }
        if inq.source.turn_index != k || inq.question.turn_index != k || inq.response.turn_index != k {
            out.push(Violation::InquiryTurnIndex(k));
        }
        if inq.question.text.trim().is_empty() {
            out.push(Violation::EmptyText(format!("inquiry {k} question")));
        }
        if inq.response.text.trim().is_empty() {
            out.push(Violation::EmptyText(format!("inquiry {k} response")));
        }
        if inq.entities.is_empty() {
            out.push(Violation::NoEntities(k));
        }
        if inq.candidates.is_empty() {
            out.push(Violation::NoCandidates(k));
        } else if !inq.candidates.contains(&inq.question.text) {
            out.push(Violation::QuestionNotCandidate(k));
        }
        if inq.entities.iter().any(|e| !e.is_anchored_in(&inq.source.text)) {
            out.push(Violation::EntitySpan(k));
        }
    }

    let injected: BTreeSet<&str> = d
        .inquiries
        .iter()
        .flat_map(|p| [p.question.text.as_str(), p.response.text.as_str()])
        .collect();
    if d.turns.iter().any(|u| injected.contains(u.text.as_str())) {
        out.push(Violation::InquiryLeak);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgmentSource {
    Auto,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub annotator: String,
    pub label: u8,
}

/// Decision on one inquiry pair, keyed by `(dialogue_id, turn_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    pub dialogue_id: String,
    pub turn_k: u32,
    pub score: Option<f64>,
    pub contradiction: bool,
    pub tau: Option<f64>,
    pub source: JudgmentSource,
    pub votes: Option<Vec<Vote>>,
}

impl Judgment {
    /// Automatic judgment: contradiction iff `score > tau`.
    pub fn auto(dialogue_id: impl Into<String>, turn_k: u32, score: f64, tau: f64) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            turn_k,
            score: Some(score),
            contradiction: score > tau,
            tau: Some(tau),
            source: JudgmentSource::Auto,
            votes: None,
        }
    }

    /// The same automatic judgment re-thresholded at a different tau.
    /// Human judgments are returned unchanged.
    pub fn with_tau(&self, tau: f64) -> Self {
        match (self.source, self.score) {
            (JudgmentSource::Auto, Some(score)) => Self::auto(self.dialogue_id.clone(), self.turn_k, score, tau),
            _ => self.clone(),
        }
    }

    pub fn key(&self) -> (&str, u32) {
        (&self.dialogue_id, self.turn_k)
    }
}

/// Checks the source-specific rules of a judgment.
pub fn validate_judgment(j: &Judgment) -> Vec<Violation> {
    let mut out = Vec::new();
    match j.source {
        JudgmentSource::Auto => {
            match j.score {
                None => out.push(Violation::MissingScore),
                Some(s) if !(0.0..=1.0).contains(&s) => out.push(Violation::ScoreRange),
                _ => {}
            }
            match j.tau {
                None => out.push(Violation::MissingTau),
                Some(t) if !(0.0..1.0).contains(&t) => out.push(Violation::TauRange),
                _ => {}
            }
            if let (Some(s), Some(t)) = (j.score, j.tau) {
                if j.contradiction != (s > t) {
                    out.push(Violation::ThresholdRule);
                }
            }
            if j.votes.is_some() {
                out.push(Violation::AutoWithVotes);
            }
        }
        JudgmentSource::Human => {
            if j.score.is_some() || j.tau.is_some() {
                out.push(Violation::HumanWithScore);
            }
            match &j.votes {
                Some(votes) if votes.len() >= 3 && votes.len() % 2 == 1 => {
                    let annotators: BTreeSet<&str> = votes.iter().map(|v| v.annotator.as_str()).collect();
                    if annotators.len() != votes.len() {
                        out.push(Violation::DuplicateAnnotator);
                    }
                    let positives = votes.iter().filter(|v| v.label == 1).count();
                    if j.contradiction != (2 * positives > votes.len()) {
                        out.push(Violation::MajorityRule);
                    }
                }
                _ => out.push(Violation::VoteCount),
            }
        }
    }
    out
}

/// The three fields a human judge labels on each inquiry pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    QuestionAppropriate,
    AnswerRelevant,
    Contradictory,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Self::QuestionAppropriate, Self::AnswerRelevant, Self::Contradictory];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::QuestionAppropriate => "question_appropriate",
            Self::AnswerRelevant => "answer_relevant",
            Self::Contradictory => "contradictory",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotator's labels on one inquiry pair, as found in a raw annotation
/// export. Dimensions are optional on read so that exports lacking one can
/// be reported precisely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationVote {
    pub task_id: String,
    pub dialogue_id: String,
    pub turn_k: u32,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_appropriate: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_relevant: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contradictory: Option<u8>,
}

impl AnnotationVote {
    pub fn label(&self, dimension: Dimension) -> Option<u8> {
        match dimension {
            Dimension::QuestionAppropriate => self.question_appropriate,
            Dimension::AnswerRelevant => self.answer_relevant,
            Dimension::Contradictory => self.contradictory,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn bot(id: &str) -> BotId {
        BotId::new(id).unwrap()
    }

    /// One turn pair and no inquiries.
    pub fn minimal_dialogue() -> Dialogue {
        Dialogue {
            dialogue_id: "A-B-0000".into(),
            bot1: bot("A"),
            bot2: bot("B"),
            turns: vec![
                Utterance::natural(Role::Bot1, 1, "hi there"),
                Utterance::natural(Role::Bot2, 1, "hello"),
            ],
            inquiries: vec![],
            seed: 7,
            config: GenerationConfig::default(),
        }
    }

    /// Two turns with one inquiry on the second Chatbot2 utterance.
    pub fn dialogue_with_inquiry() -> Dialogue {
        let source = Utterance::natural(Role::Bot2, 2, "I would love to visit New York next year.");
        let q = "Have you ever been to New York?";
        Dialogue {
            dialogue_id: "A-B-0001".into(),
            bot1: bot("A"),
            bot2: bot("B"),
            turns: vec![
                Utterance::natural(Role::Bot1, 1, "hi there"),
                Utterance::natural(Role::Bot2, 1, "hello"),
                Utterance::natural(Role::Bot1, 2, "any travel plans?"),
                source.clone(),
            ],
            inquiries: vec![InquiryPair {
                turn_k: 2,
                source,
                entities: vec![
                    Entity { surface: "New York".into(), label: EntityLabel::Gpe, start: 22, end: 30 },
                    Entity { surface: "next year".into(), label: EntityLabel::Date, start: 31, end: 40 },
                ],
                candidates: vec![q.into(), "What are your plans for next year?".into()],
                question: Utterance::question(2, q),
                response: Utterance::response(2, "Not yet, but I want to."),
            }],
            seed: 8,
            config: GenerationConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn valid_dialogues_have_no_violations() {
        assert!(validate_dialogue(&minimal_dialogue()).is_empty());
        assert!(validate_dialogue(&dialogue_with_inquiry()).is_empty());
    }

    #[test]
    fn duplicate_inquiry_turn_is_reported() {
        let mut d = dialogue_with_inquiry();
        d.inquiries.push(d.inquiries[0].clone());
        assert_eq!(validate_dialogue(&d), vec![Violation::DuplicateInquiryTurn]);
        assert_eq!(Violation::DuplicateInquiryTurn.to_string(), "duplicate inquiry turn");
    }

    #[test]
    fn bot2_opening_breaks_alternation() {
        let mut d = minimal_dialogue();
        d.turns[0].speaker = Role::Bot2;
        d.turns[1].speaker = Role::Bot1;
        let v = validate_dialogue(&d);
        assert_eq!(v, vec![Violation::SpeakerAlternation]);
        assert_eq!(v[0].to_string(), "speaker alternation");
    }

    #[test]
    fn all_violations_are_collected() {
        let mut d = dialogue_with_inquiry();
        d.turns[0].speaker = Role::Bot2;
        d.inquiries.push(d.inquiries[0].clone());
        d.inquiries[0].question.text = "Something else?".into();
        let v = validate_dialogue(&d);
        assert!(v.contains(&Violation::SpeakerAlternation));
        assert!(v.contains(&Violation::DuplicateInquiryTurn));
        assert!(v.contains(&Violation::QuestionNotCandidate(2)));
    }

    #[test]
    fn inquiry_on_bot1_only_turn_is_invalid() {
        let mut d = minimal_dialogue();
        d.turns.push(Utterance::natural(Role::Bot1, 2, "I love Paris."));
        let mut inq = dialogue_with_inquiry().inquiries.remove(0);
        inq.source = d.turns[2].clone();
        d.inquiries.push(inq);
        assert!(validate_dialogue(&d).contains(&Violation::InquirySource(2)));
    }

    #[test]
    fn leaked_inquiry_text_is_detected() {
        let mut d = dialogue_with_inquiry();
        d.turns[2].text = d.inquiries[0].question.text.clone();
        assert!(validate_dialogue(&d).contains(&Violation::InquiryLeak));
    }

    #[test]
    fn too_many_turns() {
        let mut d = minimal_dialogue();
        d.config.max_turns = 1;
        d.turns.push(Utterance::natural(Role::Bot1, 2, "again"));
        assert!(validate_dialogue(&d).contains(&Violation::TooManyTurns));
    }

    #[test]
    fn char_slice_handles_multibyte_text() {
        let text = "café in Zürich";
        assert_eq!(char_slice(text, 8, 14), Some("Zürich"));
        assert_eq!(char_slice(text, 0, 4), Some("café"));
        assert_eq!(char_slice(text, 14, 14), Some(""));
        assert_eq!(char_slice(text, 10, 15), None);
        assert_eq!(char_slice(text, 3, 2), None);
    }

    #[test]
    fn nfc_is_applied_at_ingest() {
        let decomposed = "cafe\u{301}";
        let u = Utterance::natural(Role::Bot1, 1, decomposed);
        assert_eq!(u.text, "café");
        assert_eq!(u.text.chars().count(), 4);
    }

    #[test]
    fn auto_judgment_uses_strict_inequality() {
        assert!(!Judgment::auto("d", 1, 0.15, 0.15).contradiction);
        assert!(Judgment::auto("d", 1, 0.16, 0.15).contradiction);
        assert!(validate_judgment(&Judgment::auto("d", 1, 0.15, 0.15)).is_empty());
    }

    #[test]
    fn judgment_rules() {
        let mut j = Judgment::auto("d", 1, 0.5, 0.15);
        j.contradiction = false;
        assert_eq!(validate_judgment(&j), vec![Violation::ThresholdRule]);

        let votes = |labels: &[u8]| -> Vec<Vote> {
            labels
                .iter()
                .enumerate()
                .map(|(i, &label)| Vote { annotator: format!("a{i}"), label })
                .collect()
        };
        let human = Judgment {
            dialogue_id: "d".into(),
            turn_k: 1,
            score: None,
            contradiction: true,
            tau: None,
            source: JudgmentSource::Human,
            votes: Some(votes(&[1, 1, 0])),
        };
        assert!(validate_judgment(&human).is_empty());
        let mut even = human.clone();
        even.votes = Some(votes(&[1, 0]));
        assert_eq!(validate_judgment(&even), vec![Violation::VoteCount]);
        let mut wrong = human;
        wrong.contradiction = false;
        assert_eq!(validate_judgment(&wrong), vec![Violation::MajorityRule]);
    }

    #[test]
    fn labels_round_trip_through_strings() {
        for label in EntityLabel::ALL {
            assert_eq!(label.as_str().parse::<EntityLabel>().unwrap(), label);
        }
        assert!("FOO".parse::<EntityLabel>().is_err());
    }
}

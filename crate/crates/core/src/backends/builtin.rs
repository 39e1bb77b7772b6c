//! Deterministic stand-ins for the NER, question generation and NLI models.
//!
//! These are rule-based and exist so that whole campaigns can run without
//! model weights or network access. They are not meant to be accurate.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{BackendError, NerBackend, NliBackend, QuestionBackend};
use crate::model::{Entity, EntityLabel};

/// The gazetteer shipped with the crate (`data/gazetteer.tsv`).
pub const DEFAULT_GAZETTEER: &str = include_str!("../../data/gazetteer.tsv");

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("gazetteer line {line}: expected `surface<TAB>LABEL`")]
    Format { line: usize },
    #[error("gazetteer line {line}: {source}")]
    Label {
        line: usize,
        #[source]
        source: crate::model::UnknownLabel,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
struct GazetteerEntry {
    folded: Vec<char>,
    surface: String,
    label: EntityLabel,
}

/// Surface-form lookup table, `surface<TAB>LABEL` per line.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    // keyed by the case-folded first token of each entry
    by_first_token: HashMap<String, Vec<GazetteerEntry>>,
    len: usize,
}

fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric()
}

fn first_token(folded: &[char]) -> String {
    folded.iter().take_while(|c| is_word(**c)).collect()
}

impl Gazetteer {
    pub fn parse(source: &str) -> Result<Self, GazetteerError> {
        let mut entries = Vec::new();
        for (idx, raw) in source.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, label) = line.split_once('\t').ok_or(GazetteerError::Format { line: idx + 1 })?;
            let surface = surface.trim();
            if surface.is_empty() || !surface.starts_with(is_word) {
                return Err(GazetteerError::Format { line: idx + 1 });
            }
            let label = label
                .trim()
                .parse()
                .map_err(|source| GazetteerError::Label { line: idx + 1, source })?;
            entries.push((surface.to_string(), label));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, EntityLabel)>) -> Self {
        let mut by_first_token: HashMap<String, Vec<GazetteerEntry>> = HashMap::new();
        let mut len = 0;
        for (surface, label) in entries {
            let folded: Vec<char> = surface.chars().map(fold).collect();
            by_first_token.entry(first_token(&folded)).or_default().push(GazetteerEntry {
                folded,
                surface,
                label,
            });
            len += 1;
        }
        for bucket in by_first_token.values_mut() {
            bucket.sort_by_key(|e| std::cmp::Reverse(e.folded.len()));
        }
        Self { by_first_token, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All surfaces, sorted, optionally restricted to `labels`.
    pub fn surfaces(&self, labels: Option<&[EntityLabel]>) -> Vec<String> {
        let mut out: Vec<String> = self
            .by_first_token
            .values()
            .flatten()
            .filter(|e| labels.is_none_or(|ls| ls.contains(&e.label)))
            .map(|e| e.surface.clone())
            .collect();
        out.sort();
        out
    }

    /// Every token-aligned occurrence of every entry, as
    /// `(start, end, label)` character ranges.
    fn matches(&self, chars: &[char]) -> Vec<(usize, usize, EntityLabel)> {
        let folded: Vec<char> = chars.iter().copied().map(fold).collect();
        let mut out = Vec::new();
        for start in 0..folded.len() {
            if !is_word(folded[start]) || (start > 0 && is_word(folded[start - 1])) {
                continue;
            }
            let token = first_token(&folded[start..]);
            let Some(bucket) = self.by_first_token.get(&token) else {
                continue;
            };
            for entry in bucket {
                let end = start + entry.folded.len();
                if end > folded.len() || folded[start..end] != entry.folded[..] {
                    continue;
                }
                if end < folded.len() && is_word(folded[end]) && is_word(folded[end - 1]) {
                    continue;
                }
                out.push((start, end, entry.label));
            }
        }
        out
    }
}

impl Default for Gazetteer {
    fn default() -> Self {
        Self::parse(DEFAULT_GAZETTEER).expect("shipped gazetteer parses")
    }
}

/// Pattern list for temporal and numeric expressions. Matching is
/// case-insensitive except for the month name "May", which must be
/// capitalized so the modal verb is not tagged.
const PATTERNS: &[(&str, EntityLabel)] = &[
    (
        r"(?i)\b(?:january|february|march|april|june|july|august|september|october|november|december)\b",
        EntityLabel::Date,
    ),
    (r"\bMay\b", EntityLabel::Date),
    (r"(?i)\b(?:monday|tuesday|wednesday|thursday|friday|saturday|sunday)s?\b", EntityLabel::Date),
    (r"(?i)\b(?:next|last)\s+(?:year|week|month)\b", EntityLabel::Date),
    (r"(?i)\b(?:tomorrow|yesterday)\b", EntityLabel::Date),
    (r"(?i)\b\d{1,2}(?::\d{2})?\s?(?:am|pm)\b", EntityLabel::Time),
    (r"\b\d{1,2}:\d{2}\b", EntityLabel::Time),
    (r"(?i)\b(?:tonight|noon|midnight)\b", EntityLabel::Time),
    (r"(?i)\bthis\s+(?:morning|afternoon|evening)\b", EntityLabel::Time),
    (r"\b\d+\b", EntityLabel::Cardinal),
    (r"(?i)\b(?:one|two|three|four|five|six|seven|eight|nine|ten)\b", EntityLabel::Cardinal),
];

static COMPILED: LazyLock<Vec<(Regex, EntityLabel)>> = LazyLock::new(|| {
    PATTERNS
        .iter()
        .map(|(p, l)| (Regex::new(p).expect("pattern compiles"), *l))
        .collect()
});

/// Gazetteer lookup plus the temporal/numeric pattern list.
///
/// Overlapping candidates are resolved longest first, then leftmost; the
/// result is sorted by start offset. Spans are character offsets.
#[derive(Debug, Clone, Default)]
pub struct GazetteerNer {
    gazetteer: Gazetteer,
    allow: Option<BTreeSet<EntityLabel>>,
}

impl GazetteerNer {
    pub fn new(gazetteer: Gazetteer) -> Self {
        Self { gazetteer, allow: None }
    }

    /// Restricts output to the given labels. By default all 18 are kept.
    pub fn with_allowed_labels(mut self, labels: impl IntoIterator<Item = EntityLabel>) -> Self {
        self.allow = Some(labels.into_iter().collect());
        self
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn extract_entities(&self, text: &str) -> Vec<Entity> {
        let chars: Vec<char> = text.chars().collect();
        let mut candidates = self.gazetteer.matches(&chars);

        // byte -> char offset for regex matches
        let mut char_at = vec![0usize; text.len() + 1];
        let mut n = 0;
        for (b, _) in text.char_indices() {
            char_at[b] = n;
            n += 1;
        }
        char_at[text.len()] = n;
        for (re, label) in COMPILED.iter() {
            for m in re.find_iter(text) {
                candidates.push((char_at[m.start()], char_at[m.end()], *label));
            }
        }

        candidates.retain(|(_, _, l)| self.allow.as_ref().is_none_or(|a| a.contains(l)));
        candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut taken: Vec<(usize, usize, EntityLabel)> = Vec::new();
        for c in candidates {
            if taken.iter().all(|t| c.1 <= t.0 || c.0 >= t.1) {
                taken.push(c);
            }
        }
        taken.sort_by_key(|t| t.0);
        taken
            .into_iter()
            .map(|(start, end, label)| Entity {
                surface: chars[start..end].iter().collect(),
                label,
                start,
                end,
            })
            .collect()
    }
}

impl NerBackend for GazetteerNer {
    fn identity(&self) -> &str {
        "builtin-gazetteer-ner"
    }

    fn extract(&self, text: &str) -> Result<Vec<Entity>, BackendError> {
        Ok(self.extract_entities(text))
    }
}

/// One fixed question template per entity label.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateQuestions;

impl TemplateQuestions {
    pub fn render(entity: &Entity) -> String {
        use EntityLabel::*;
        let s = &entity.surface;
        match entity.label {
            Person | Org | Product | Event | WorkOfArt => format!("What do you think of {s}?"),
            Gpe | Loc | Fac => format!("Have you ever been to {s}?"),
            Date | Time => format!("What are your plans for {s}?"),
            _ => format!("Can you tell me more about {s}?"),
        }
    }
}

impl QuestionBackend for TemplateQuestions {
    fn identity(&self) -> &str {
        "builtin-template-qg"
    }

    fn question(&self, _context: &str, entity: &Entity) -> Result<String, BackendError> {
        Ok(Self::render(entity))
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "doing", "dont", "didnt", "doesnt",
    "for", "from", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "im",
    "in", "into", "is", "isnt", "it", "its", "ive", "just", "me", "my", "myself", "no", "nor", "not", "of", "on",
    "or", "our", "ours", "she", "so", "some", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "too", "very", "was", "wasnt", "we", "were", "what", "when", "where", "which", "who",
    "why", "will", "with", "would", "yes", "you", "your", "yours",
];

const NEGATIONS: &[&str] = &["not", "never", "no", "none", "nobody", "nothing"];

struct Normalized {
    content: BTreeSet<String>,
    negated: bool,
}

fn normalize(text: &str) -> Normalized {
    let lower = text.to_lowercase();
    let mut negated = lower.contains("did not say");
    let mut content = BTreeSet::new();
    for raw in lower.split_whitespace() {
        let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '’');
        let trimmed = trimmed.trim_matches(|c| c == '\'' || c == '’');
        if NEGATIONS.contains(&trimmed) || trimmed.ends_with("n't") || trimmed.ends_with("n’t") {
            negated = true;
        }
        let token: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
        if !token.is_empty() && !STOPWORDS.contains(&token.as_str()) {
            content.insert(token);
        }
    }
    Normalized { content, negated }
}

/// Rule-table contradiction scorer over token overlap and negation markers.
///
/// Scores are `0.9` when the hypothesis shares at least 30% of the premise's
/// content tokens and exactly one side is negated, `0.1` for overlapping
/// pairs otherwise, and `0.5` when overlap is below 30%.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleNli;

impl RuleNli {
    pub const OVERLAP_THRESHOLD: f64 = 0.3;

    pub fn score(premise: &str, hypothesis: &str) -> Result<f64, BackendError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(BackendError::Argument("premise and hypothesis must be nonempty".into()));
        }
        let p = normalize(premise);
        let h = normalize(hypothesis);
        let overlap = if p.content.is_empty() {
            0.0
        } else {
            p.content.intersection(&h.content).count() as f64 / p.content.len() as f64
        };
        Ok(if overlap < Self::OVERLAP_THRESHOLD {
            0.5
        } else if p.negated != h.negated {
            0.9
        } else {
            0.1
        })
    }
}

impl NliBackend for RuleNli {
    fn identity(&self) -> &str {
        "builtin-rule-nli"
    }

    fn contradiction(&self, premise: &str, hypothesis: &str) -> Result<f64, BackendError> {
        Self::score(premise, hypothesis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(text: &str) -> Vec<(String, EntityLabel)> {
        GazetteerNer::default()
            .extract_entities(text)
            .into_iter()
            .map(|e| (e.surface, e.label))
            .collect()
    }

    #[test]
    fn travel_sentence() {
        assert_eq!(
            pairs("I would love to visit New York next year."),
            vec![("New York".into(), EntityLabel::Gpe), ("next year".into(), EntityLabel::Date)]
        );
    }

    #[test]
    fn no_entities() {
        assert!(pairs("ok").is_empty());
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(pairs("new york"), vec![("new york".into(), EntityLabel::Gpe)]);
    }

    #[test]
    fn longest_match_wins() {
        assert_eq!(
            pairs("I read the New York Times"),
            vec![("the New York Times".into(), EntityLabel::Org)]
        );
        assert_eq!(pairs("at 10 pm"), vec![("10 pm".into(), EntityLabel::Time)]);
    }

    #[test]
    fn token_boundaries_are_respected() {
        // "Parisian" must not produce "Paris"
        assert!(pairs("a Parisian cafe").is_empty());
        assert!(pairs("I may go").is_empty());
        assert_eq!(pairs("in May"), vec![("May".into(), EntityLabel::Date)]);
    }

    #[test]
    fn numbers_and_days() {
        assert_eq!(
            pairs("I have two dogs and 3 cats since Monday"),
            vec![
                ("two".into(), EntityLabel::Cardinal),
                ("3".into(), EntityLabel::Cardinal),
                ("Monday".into(), EntityLabel::Date),
            ]
        );
    }

    #[test]
    fn spans_use_character_offsets() {
        let text = "Café trip to Zürich and Paris";
        let ents = GazetteerNer::default().extract_entities(text);
        assert_eq!(ents.len(), 1);
        assert_eq!((ents[0].start, ents[0].end), (24, 29));
        assert!(ents[0].is_anchored_in(text));
    }

    #[test]
    fn allow_list_filters_labels() {
        let ner = GazetteerNer::default().with_allowed_labels([EntityLabel::Date]);
        let ents = ner.extract_entities("I would love to visit New York next year.");
        assert_eq!(ents.len(), 1);
        assert_eq!(ents[0].surface, "next year");
    }

    #[test]
    fn gazetteer_parse_errors_name_the_line() {
        let err = Gazetteer::parse("Paris\tGPE\nBroken line\n").unwrap_err();
        assert!(matches!(err, GazetteerError::Format { line: 2 }));
        let err = Gazetteer::parse("# c\nParis\tCITY\n").unwrap_err();
        assert!(matches!(err, GazetteerError::Label { line: 2, .. }));
    }

    #[test]
    fn question_templates() {
        let q = |surface: &str, label| {
            TemplateQuestions::render(&Entity { surface: surface.into(), label, start: 0, end: 0 })
        };
        assert_eq!(q("Metallica", EntityLabel::Org), "What do you think of Metallica?");
        assert_eq!(q("New York", EntityLabel::Gpe), "Have you ever been to New York?");
        assert_eq!(q("next year", EntityLabel::Date), "What are your plans for next year?");
        assert_eq!(q("two", EntityLabel::Cardinal), "Can you tell me more about two?");
    }

    #[test]
    fn rule_table() {
        assert_eq!(RuleNli::score("i have a dog", "i do not have a dog").unwrap(), 0.9);
        assert_eq!(RuleNli::score("i have a dog", "i have a dog").unwrap(), 0.1);
        assert_eq!(RuleNli::score("i have a dog", "pizza is great").unwrap(), 0.5);
        assert_eq!(RuleNli::score("I don't have a dog.", "I have a dog!").unwrap(), 0.9);
        assert_eq!(RuleNli::score("I never had a dog", "I didn't have a dog").unwrap(), 0.1);
        assert!(matches!(RuleNli::score(" ", "x"), Err(BackendError::Argument(_))));
    }

    #[test]
    fn negation_phrase_about_entity() {
        let s = RuleNli::score("I really like New York.", "I did not say that about New York.").unwrap();
        assert_eq!(s, 0.9);
        let s = RuleNli::score("I really like New York.", "As I said, I really like New York.").unwrap();
        assert_eq!(s, 0.1);
    }

    proptest! {
        #[test]
        fn rule_scores_are_in_the_fixed_set(p in "[a-z' ]{1,30}[a-z]", h in "[a-z' ]{1,30}[a-z]") {
            let s = RuleNli::score(&p, &h).unwrap();
            prop_assert!(s == 0.1 || s == 0.5 || s == 0.9);
        }

        #[test]
        fn inserted_entities_are_found_with_exact_spans(
            prefix in "[a-z ]{0,20}",
            suffix in "[a-z ]{0,20}",
            idx in 0usize..200,
        ) {
            let ner = GazetteerNer::default();
            let surfaces = ner.gazetteer().surfaces(None);
            let surface = &surfaces[idx % surfaces.len()];
            let text = format!("{prefix} {surface} {suffix}");
            let ents = ner.extract_entities(&text);
            for e in &ents {
                prop_assert!(e.is_anchored_in(&text));
            }
            let start = prefix.chars().count() + 1;
            // the inserted surface is covered by some entity span
            prop_assert!(ents.iter().any(|e| e.start <= start && e.end >= start + surface.chars().count()));
            prop_assert!(ents.windows(2).all(|w| w[0].end <= w[1].start));
        }
    }
}

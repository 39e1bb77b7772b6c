//! Canonical JSONL encoding of dialogues and judgments.
//!
//! One record per line, UTF-8, object keys sorted, no insignificant
//! whitespace. Equal values always encode to equal bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    validate_dialogue, validate_judgment, BotId, Dialogue, Entity, GenerationConfig, InquiryPair, Judgment,
    JudgmentSource, Role, Utterance, UtteranceKind, Violation, Vote,
};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("parse error at character {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<LogError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LogError {
    /// 1-based line number for errors raised while reading a file.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::AtLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DialogueRecord {
    dialogue_id: String,
    bot1: BotId,
    bot2: BotId,
    seed: u64,
    config: GenerationConfig,
    turns: Vec<Utterance>,
    inquiries: Vec<InquiryRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InquiryRecord {
    turn_k: u32,
    entities: Vec<Entity>,
    candidates: Vec<String>,
    question: String,
    response: String,
}

#[derive(Serialize, Deserialize)]
struct JudgmentRecord {
    dialogue_id: String,
    turn_k: u32,
    source: JudgmentSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    contradiction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    votes: Option<Vec<Vote>>,
}

/// Writes `value` as compact JSON with object keys sorted at every level.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("record types serialize infallibly");
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn parse_error(line: &str, err: serde_json::Error) -> LogError {
    // serde_json reports a 1-based byte column on the (single) line.
    let byte = err.column().saturating_sub(1).min(line.len());
    let mut boundary = byte;
    while !line.is_char_boundary(boundary) {
        boundary -= 1;
    }
    LogError::Parse {
        position: line[..boundary].chars().count(),
        message: err.to_string(),
    }
}

/// Encodes a valid dialogue as one canonical line (without trailing newline).
pub fn serialize_dialogue(d: &Dialogue) -> Result<String, LogError> {
    let violations = validate_dialogue(d);
    if !violations.is_empty() {
        return Err(LogError::Validation(violations));
    }
    let record = DialogueRecord {
        dialogue_id: d.dialogue_id.clone(),
        bot1: d.bot1.clone(),
        bot2: d.bot2.clone(),
        seed: d.seed,
        config: d.config,
        turns: d.turns.clone(),
        inquiries: d
            .inquiries
            .iter()
            .map(|p| InquiryRecord {
                turn_k: p.turn_k,
                entities: p.entities.clone(),
                candidates: p.candidates.clone(),
                question: p.question.text.clone(),
                response: p.response.text.clone(),
            })
            .collect(),
    };
    Ok(to_canonical_json(&record))
}

/// Decodes one dialogue line and validates it.
pub fn deserialize_dialogue(line: &str) -> Result<Dialogue, LogError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let record: DialogueRecord = serde_json::from_str(line).map_err(|e| parse_error(line, e))?;
    let mut unresolved = Vec::new();
    let inquiries = record
        .inquiries
        .into_iter()
        .map(|r| {
            let source = record
                .turns
                .iter()
                .find(|u| u.turn_index == r.turn_k && u.speaker == Role::Bot2 && u.kind == UtteranceKind::Natural)
                .cloned()
                .unwrap_or_else(|| {
                    unresolved.push(Violation::InquirySource(r.turn_k));
                    // Placeholder keeps the remaining checks running.
                    Utterance::natural(Role::Bot2, r.turn_k, "")
                });
            InquiryPair {
                turn_k: r.turn_k,
                source,
                entities: r.entities,
                candidates: r.candidates,
                question: Utterance::question(r.turn_k, &r.question),
                response: Utterance::response(r.turn_k, &r.response),
            }
        })
        .collect();
    let d = Dialogue {
        dialogue_id: record.dialogue_id,
        bot1: record.bot1,
        bot2: record.bot2,
        turns: record.turns,
        inquiries,
        seed: record.seed,
        config: record.config,
    };
    let mut violations = validate_dialogue(&d);
    for v in unresolved {
        if !violations.contains(&v) {
            violations.push(v);
        }
    }
    if violations.is_empty() {
        Ok(d)
    } else {
        Err(LogError::Validation(violations))
    }
}

pub fn serialize_judgment(j: &Judgment) -> Result<String, LogError> {
    let violations = validate_judgment(j);
    if !violations.is_empty() {
        return Err(LogError::Validation(violations));
    }
    Ok(to_canonical_json(&JudgmentRecord {
        dialogue_id: j.dialogue_id.clone(),
        turn_k: j.turn_k,
        source: j.source,
        score: j.score,
        tau: j.tau,
        contradiction: j.contradiction,
        votes: j.votes.clone(),
    }))
}

/// Decodes one judgment line. Unknown keys are ignored so annotation
/// decision exports, which carry extra per-dimension fields, read as
/// judgments too.
pub fn deserialize_judgment(line: &str) -> Result<Judgment, LogError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let r: JudgmentRecord = serde_json::from_str(line).map_err(|e| parse_error(line, e))?;
    let j = Judgment {
        dialogue_id: r.dialogue_id,
        turn_k: r.turn_k,
        score: r.score,
        contradiction: r.contradiction,
        tau: r.tau,
        source: r.source,
        votes: r.votes,
    };
    let violations = validate_judgment(&j);
    if violations.is_empty() {
        Ok(j)
    } else {
        Err(LogError::Validation(violations))
    }
}

fn read_lines<T>(path: &Path, decode: impl Fn(&str) -> Result<T, LogError>) -> Result<Vec<T>, LogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(decode(&line).map_err(|e| LogError::AtLine {
            line: idx + 1,
            source: Box::new(e),
        })?);
    }
    Ok(out)
}

pub fn read_dialogues(path: &Path) -> Result<Vec<Dialogue>, LogError> {
    read_lines(path, deserialize_dialogue)
}

pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>, LogError> {
    read_lines(path, deserialize_judgment)
}

pub fn write_dialogues<'a>(path: &Path, dialogues: impl IntoIterator<Item = &'a Dialogue>) -> Result<(), LogError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for d in dialogues {
        writeln!(out, "{}", serialize_dialogue(d)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_judgments<'a>(path: &Path, judgments: impl IntoIterator<Item = &'a Judgment>) -> Result<(), LogError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for j in judgments {
        writeln!(out, "{}", serialize_judgment(j)?)?;
    }
    out.flush()?;
    Ok(())
}

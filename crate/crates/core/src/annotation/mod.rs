//! Human annotation: sampling inquiry pairs into a task queue, collecting
//! three binary labels per task from a fixed panel of annotators, and
//! reducing them to majority decisions.
//!
//! Every registration and vote is appended to an event log before it is
//! acknowledged. Opening a store replays that log, so a restarted service
//! continues exactly where it stopped.

pub mod server;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log::{serialize_judgment, to_canonical_json, LogError};
use crate::model::{AnnotationVote, BotId, Dialogue, Dimension, Judgment, Role, Vote};
use crate::recognition::aggregate_votes;

pub const DEFAULT_PANEL_SIZE: usize = 3;
pub const DEFAULT_CONTEXT_WINDOW: usize = 4;

/// Guideline text served to judges. Written for this tool; the original
/// study's instructions are not public.
pub const GUIDELINES: &str = "\
For each item you see a few lines of conversation, a statement by the evaluated bot, \
a question asked about that statement, and the bot's answer.\n\
question_appropriate: 1 if the question is fluent and asks about something the statement mentions.\n\
answer_relevant: 1 if the answer addresses the question.\n\
contradictory: 1 if the answer contradicts the statement.\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLine {
    pub speaker: Role,
    pub text: String,
}

/// What a judge sees: preceding natural context, then `(u_2k, q_k, r_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDisplay {
    pub context: Vec<ContextLine>,
    pub source: String,
    pub question: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub dialogue_id: String,
    pub turn_k: u32,
    pub bot1: BotId,
    pub bot2: BotId,
    pub display: TaskDisplay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub question_appropriate: u8,
    pub answer_relevant: u8,
    pub contradictory: u8,
}

impl Labels {
    pub fn get(&self, dimension: Dimension) -> u8 {
        match dimension {
            Dimension::QuestionAppropriate => self.question_appropriate,
            Dimension::AnswerRelevant => self.answer_relevant,
            Dimension::Contradictory => self.contradictory,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("pair ({bot1}, {bot2}) has {size} dialogues, need {needed}")]
    InsufficientPool {
        bot1: BotId,
        bot2: BotId,
        size: usize,
        needed: usize,
    },
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("`{annotator}` already labeled task `{task_id}`")]
    Conflict { annotator: String, task_id: String },
    #[error("panel is full ({0} annotators)")]
    PanelFull(usize),
    #[error("label {value} for `{dimension}` is not 0 or 1")]
    InvalidLabel { dimension: Dimension, value: u8 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Samples `per_pair_n` dialogues per ordered pair, uniformly without
/// replacement, and turns every inquiry pair in them into a task. Pairs are
/// visited in `(bot1, bot2)` order and sampled dialogues keep their log
/// order, so task ids depend only on the inputs and `seed`.
pub fn enqueue_sample(
    dialogues: &[Dialogue],
    per_pair_n: usize,
    seed: u64,
    context_window: usize,
) -> Result<Vec<AnnotationTask>, AnnotationError> {
    if per_pair_n == 0 {
        return Ok(Vec::new());
    }
    let mut pools: BTreeMap<(&BotId, &BotId), Vec<&Dialogue>> = BTreeMap::new();
    for d in dialogues {
        pools.entry((&d.bot1, &d.bot2)).or_default().push(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::new();
    for ((bot1, bot2), pool) in pools {
        if pool.len() < per_pair_n {
            return Err(AnnotationError::InsufficientPool {
                bot1: bot1.clone(),
                bot2: bot2.clone(),
                size: pool.len(),
                needed: per_pair_n,
            });
        }
        let mut picked = index::sample(&mut rng, pool.len(), per_pair_n).into_vec();
        picked.sort_unstable();
        for d in picked.into_iter().map(|i| pool[i]) {
            for pair in &d.inquiries {
                let pos = d
                    .turns
                    .iter()
                    .position(|u| u.speaker == Role::Bot2 && u.turn_index == pair.turn_k)
                    .unwrap_or(0);
                let context = d.turns[pos.saturating_sub(context_window)..pos]
                    .iter()
                    .map(|u| ContextLine {
                        speaker: u.speaker,
                        text: u.text.clone(),
                    })
                    .collect();
                tasks.push(AnnotationTask {
                    task_id: format!("t{:06}", tasks.len() + 1),
                    dialogue_id: d.dialogue_id.clone(),
                    turn_k: pair.turn_k,
                    bot1: d.bot1.clone(),
                    bot2: d.bot2.clone(),
                    display: TaskDisplay {
                        context,
                        source: pair.source.text.clone(),
                        question: pair.question.text.clone(),
                        response: pair.response.text.clone(),
                    },
                });
            }
        }
    }
    Ok(tasks)
}

pub fn write_tasks(path: &Path, tasks: &[AnnotationTask]) -> Result<(), AnnotationError> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in tasks {
        writeln!(out, "{}", to_canonical_json(t))?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, AnnotationError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AnnotationError::Corrupt {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_tasks(path: &Path) -> Result<Vec<AnnotationTask>, AnnotationError> {
    read_jsonl(path)
}

/// Reads a raw vote export.
pub fn read_votes(path: &Path) -> Result<Vec<AnnotationVote>, AnnotationError> {
    read_jsonl(path)
}

/// Records of the append-only event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Register { annotator: String },
    Vote(AnnotationVote),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub tasks: usize,
    pub decided: usize,
    /// Votes submitted per registered annotator.
    pub annotators: BTreeMap<String, usize>,
}

/// Result of an accepted submission.
#[derive(Debug, Clone, PartialEq)]
pub struct Submitted {
    /// Present once the last panel member has voted on the task.
    pub decision: Option<Judgment>,
}

/// Tasks, the annotator panel and all votes. Not internally synchronized;
/// the service wraps it in a mutex, which serializes submissions.
#[derive(Debug)]
pub struct AnnotationStore {
    tasks: Vec<AnnotationTask>,
    task_index: BTreeMap<String, usize>,
    panel_size: usize,
    annotators: Vec<String>,
    /// Per task, votes in arrival order.
    votes: Vec<Vec<(String, Labels)>>,
    /// Every vote in arrival order, for the raw export.
    arrival: Vec<AnnotationVote>,
    log: Option<BufWriter<File>>,
}

impl AnnotationStore {
    /// A store without durable log, e.g. for tests.
    pub fn in_memory(tasks: Vec<AnnotationTask>, panel_size: usize) -> Result<Self, AnnotationError> {
        if panel_size < 3 || panel_size.is_multiple_of(2) {
            return Err(AnnotationError::Argument(format!(
                "panel size must be odd and at least 3, got {panel_size}"
            )));
        }
        let mut task_index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if task_index.insert(t.task_id.clone(), i).is_some() {
                return Err(AnnotationError::Argument(format!("duplicate task id `{}`", t.task_id)));
            }
        }
        Ok(Self {
            votes: vec![Vec::new(); tasks.len()],
            tasks,
            task_index,
            panel_size,
            annotators: Vec::new(),
            arrival: Vec::new(),
            log: None,
        })
    }

    /// Opens a store backed by the event log at `log_path`, replaying any
    /// events already there.
    pub fn open(tasks: Vec<AnnotationTask>, panel_size: usize, log_path: &Path) -> Result<Self, AnnotationError> {
        let mut store = Self::in_memory(tasks, panel_size)?;
        if log_path.exists() {
            let events: Vec<Event> = read_jsonl(log_path)?;
            for (idx, event) in events.into_iter().enumerate() {
                let applied = match event {
                    Event::Register { annotator } => store.register(&annotator).map(|_| ()),
                    Event::Vote(v) => store.replay_vote(v),
                };
                applied.map_err(|e| AnnotationError::Corrupt {
                    path: log_path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            }
        }
        store.log = Some(BufWriter::new(OpenOptions::new().create(true).append(true).open(log_path)?));
        Ok(store)
    }

    fn append(&mut self, event: &Event) -> Result<(), AnnotationError> {
        if let Some(log) = &mut self.log {
            writeln!(log, "{}", to_canonical_json(event))?;
            log.flush()?;
            log.get_ref().sync_data()?;
        }
        Ok(())
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn panel_size(&self) -> usize {
        self.panel_size
    }

    /// Adds `annotator` to the panel. Returns `false` when already present.
    pub fn register(&mut self, annotator: &str) -> Result<bool, AnnotationError> {
        if annotator.trim().is_empty() {
            return Err(AnnotationError::Argument("annotator id must be nonempty".into()));
        }
        if self.annotators.iter().any(|a| a == annotator) {
            return Ok(false);
        }
        if self.annotators.len() == self.panel_size {
            return Err(AnnotationError::PanelFull(self.panel_size));
        }
        self.append(&Event::Register {
            annotator: annotator.to_string(),
        })?;
        self.annotators.push(annotator.to_string());
        Ok(true)
    }

    fn check_annotator(&self, annotator: &str) -> Result<(), AnnotationError> {
        if self.annotators.iter().any(|a| a == annotator) {
            Ok(())
        } else {
            Err(AnnotationError::UnknownAnnotator(annotator.to_string()))
        }
    }

    /// First task, in task-id order, that `annotator` has not labeled.
    pub fn next_task(&self, annotator: &str) -> Result<Option<&AnnotationTask>, AnnotationError> {
        self.check_annotator(annotator)?;
        Ok(self
            .tasks
            .iter()
            .zip(&self.votes)
            .find(|(_, votes)| votes.iter().all(|(a, _)| a != annotator))
            .map(|(t, _)| t))
    }

    fn validate(&self, annotator: &str, task_id: &str, labels: &Labels) -> Result<usize, AnnotationError> {
        self.check_annotator(annotator)?;
        let idx = *self
            .task_index
            .get(task_id)
            .ok_or_else(|| AnnotationError::UnknownTask(task_id.to_string()))?;
        for dimension in Dimension::ALL {
            let value = labels.get(dimension);
            if value > 1 {
                return Err(AnnotationError::InvalidLabel { dimension, value });
            }
        }
        if self.votes[idx].iter().any(|(a, _)| a == annotator) {
            return Err(AnnotationError::Conflict {
                annotator: annotator.to_string(),
                task_id: task_id.to_string(),
            });
        }
        Ok(idx)
    }

    fn record(&mut self, idx: usize, annotator: &str, labels: Labels) -> Option<Judgment> {
        let task = &self.tasks[idx];
        self.arrival.push(AnnotationVote {
            task_id: task.task_id.clone(),
            dialogue_id: task.dialogue_id.clone(),
            turn_k: task.turn_k,
            annotator: annotator.to_string(),
            question_appropriate: Some(labels.question_appropriate),
            answer_relevant: Some(labels.answer_relevant),
            contradictory: Some(labels.contradictory),
        });
        self.votes[idx].push((annotator.to_string(), labels));
        self.decision(idx)
    }

    fn replay_vote(&mut self, v: AnnotationVote) -> Result<(), AnnotationError> {
        let labels = Labels {
            question_appropriate: v.question_appropriate.unwrap_or(u8::MAX),
            answer_relevant: v.answer_relevant.unwrap_or(u8::MAX),
            contradictory: v.contradictory.unwrap_or(u8::MAX),
        };
        let idx = self.validate(&v.annotator, &v.task_id, &labels)?;
        self.record(idx, &v.annotator, labels);
        Ok(())
    }

    /// Stores one annotator's labels for a task. Each annotator labels each
    /// task once; a second submission is a conflict.
    pub fn submit(&mut self, annotator: &str, task_id: &str, labels: Labels) -> Result<Submitted, AnnotationError> {
        let idx = self.validate(annotator, task_id, &labels)?;
        let task = &self.tasks[idx];
        self.append(&Event::Vote(AnnotationVote {
            task_id: task.task_id.clone(),
            dialogue_id: task.dialogue_id.clone(),
            turn_k: task.turn_k,
            annotator: annotator.to_string(),
            question_appropriate: Some(labels.question_appropriate),
            answer_relevant: Some(labels.answer_relevant),
            contradictory: Some(labels.contradictory),
        }))?;
        Ok(Submitted {
            decision: self.record(idx, annotator, labels),
        })
    }

    fn decision(&self, idx: usize) -> Option<Judgment> {
        let votes = &self.votes[idx];
        if votes.len() < self.panel_size {
            return None;
        }
        let task = &self.tasks[idx];
        let contradictory = votes
            .iter()
            .map(|(a, l)| Vote {
                annotator: a.clone(),
                label: l.contradictory,
            })
            .collect();
        aggregate_votes(&task.dialogue_id, task.turn_k, contradictory).ok()
    }

    fn majority(&self, idx: usize, dimension: Dimension) -> u8 {
        let votes = &self.votes[idx];
        let positives = votes.iter().filter(|(_, l)| l.get(dimension) == 1).count();
        u8::from(2 * positives > votes.len())
    }

    /// Decided tasks in task order: the human judgment for the contradiction
    /// dimension plus the majority of every dimension.
    pub fn export_decisions(&self) -> String {
        let mut out = String::new();
        for idx in 0..self.tasks.len() {
            let Some(judgment) = self.decision(idx) else { continue };
            let line = serialize_judgment(&judgment).expect("aggregated judgments are valid");
            let mut value: serde_json::Value = serde_json::from_str(&line).expect("own output parses");
            let obj = value.as_object_mut().expect("judgment is an object");
            obj.insert("task_id".into(), self.tasks[idx].task_id.clone().into());
            let majorities: serde_json::Map<String, serde_json::Value> = Dimension::ALL
                .iter()
                .map(|&d| (d.as_str().to_string(), self.majority(idx, d).into()))
                .collect();
            obj.insert("majority".into(), majorities.into());
            out.push_str(&to_canonical_json(&value));
            out.push('\n');
        }
        out
    }

    /// Every vote in arrival order.
    pub fn export_raw(&self) -> String {
        self.arrival.iter().map(|v| to_canonical_json(v) + "\n").collect()
    }

    pub fn progress(&self) -> Progress {
        let mut annotators: BTreeMap<String, usize> = self.annotators.iter().map(|a| (a.clone(), 0)).collect();
        for v in &self.arrival {
            *annotators.entry(v.annotator.clone()).or_default() += 1;
        }
        Progress {
            tasks: self.tasks.len(),
            decided: self.votes.iter().filter(|v| v.len() >= self.panel_size).count(),
            annotators,
        }
    }
}

/// Majority judgments recomputed from a raw vote export, keyed by
/// `(dialogue_id, turn_k)` and grouped in first-seen order. Only pairs with
/// an odd number of at least three votes are decided.
pub fn decisions_from_votes(votes: &[AnnotationVote]) -> Result<Vec<Judgment>, AnnotationError> {
    let mut order = Vec::new();
    let mut grouped: BTreeMap<(&str, u32), Vec<Vote>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for v in votes {
        let key = (v.dialogue_id.as_str(), v.turn_k);
        let label = v.contradictory.ok_or_else(|| {
            AnnotationError::Argument(format!("vote by `{}` on {} lacks `contradictory`", v.annotator, v.dialogue_id))
        })?;
        if seen.insert(key) {
            order.push(key);
        }
        grouped.entry(key).or_default().push(Vote {
            annotator: v.annotator.clone(),
            label,
        });
    }
    let mut out = Vec::new();
    for key in order {
        let votes = grouped.remove(&key).expect("grouped above");
        if votes.len() >= 3 && votes.len() % 2 == 1 {
            out.push(
                aggregate_votes(key.0, key.1, votes).map_err(|e| AnnotationError::Argument(e.to_string()))?,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::dialogue_with_inquiry;

    fn task(id: &str) -> AnnotationTask {
        AnnotationTask {
            task_id: id.into(),
            dialogue_id: format!("d-{id}"),
            turn_k: 1,
            bot1: BotId::new("A").unwrap(),
            bot2: BotId::new("B").unwrap(),
            display: TaskDisplay {
                context: vec![],
                source: "s".into(),
                question: "q?".into(),
                response: "r".into(),
            },
        }
    }

    fn labels(c: u8) -> Labels {
        Labels {
            question_appropriate: 1,
            answer_relevant: 1,
            contradictory: c,
        }
    }

    fn panel(store: &mut AnnotationStore) {
        for a in ["x", "y", "z"] {
            assert!(store.register(a).unwrap());
        }
    }

    #[test]
    fn sampling_is_seeded_and_sized() {
        let base = dialogue_with_inquiry();
        let pool: Vec<Dialogue> = (0..10)
            .map(|i| {
                let mut d = base.clone();
                d.dialogue_id = format!("A-B-{i:04}");
                d
            })
            .collect();
        let a = enqueue_sample(&pool, 4, 9, DEFAULT_CONTEXT_WINDOW).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, enqueue_sample(&pool, 4, 9, DEFAULT_CONTEXT_WINDOW).unwrap());
        assert!(enqueue_sample(&pool, 0, 9, 4).unwrap().is_empty());
        assert!(matches!(
            enqueue_sample(&pool, 11, 9, 4),
            Err(AnnotationError::InsufficientPool { size: 10, needed: 11, .. })
        ));
        let t = &a[0];
        assert_eq!(t.task_id, "t000001");
        assert_eq!(t.display.question, "Have you ever been to New York?");
        assert!(t.display.context.len() <= DEFAULT_CONTEXT_WINDOW);
        assert!(t.display.context.iter().all(|c| c.text != t.display.source));
    }

    #[test]
    fn majority_decision_after_last_vote() {
        let mut store = AnnotationStore::in_memory(vec![task("t1")], 3).unwrap();
        panel(&mut store);
        assert!(store.submit("x", "t1", labels(1)).unwrap().decision.is_none());
        assert!(store.submit("y", "t1", labels(1)).unwrap().decision.is_none());
        let j = store.submit("z", "t1", labels(0)).unwrap().decision.unwrap();
        assert!(j.contradiction);
        assert_eq!(store.export_decisions().lines().count(), 1);
        assert_eq!(store.export_raw().lines().count(), 3);
    }

    #[test]
    fn submission_errors() {
        let mut store = AnnotationStore::in_memory(vec![task("t1")], 3).unwrap();
        panel(&mut store);
        store.submit("x", "t1", labels(1)).unwrap();
        assert!(matches!(store.submit("x", "t1", labels(0)), Err(AnnotationError::Conflict { .. })));
        assert!(matches!(store.submit("y", "nope", labels(0)), Err(AnnotationError::UnknownTask(_))));
        assert!(matches!(store.submit("w", "t1", labels(0)), Err(AnnotationError::UnknownAnnotator(_))));
        assert!(matches!(store.submit("y", "t1", labels(2)), Err(AnnotationError::InvalidLabel { .. })));
        assert!(matches!(store.register("w"), Err(AnnotationError::PanelFull(3))));
        assert!(!store.register("x").unwrap());
        assert!(store.next_task("w").is_err());
        assert_eq!(store.export_raw().lines().count(), 1);
    }

    #[test]
    fn next_task_follows_task_order() {
        let mut store = AnnotationStore::in_memory(vec![task("t1"), task("t2")], 3).unwrap();
        panel(&mut store);
        assert_eq!(store.next_task("x").unwrap().unwrap().task_id, "t1");
        store.submit("x", "t2", labels(0)).unwrap();
        assert_eq!(store.next_task("x").unwrap().unwrap().task_id, "t1");
        store.submit("x", "t1", labels(0)).unwrap();
        assert!(store.next_task("x").unwrap().is_none());
        assert_eq!(store.next_task("y").unwrap().unwrap().task_id, "t1");
    }

    #[test]
    fn empty_store_exports_nothing() {
        let store = AnnotationStore::in_memory(vec![], 3).unwrap();
        assert_eq!(store.export_decisions(), "");
        assert_eq!(store.export_raw(), "");
        assert!(AnnotationStore::in_memory(vec![], 2).is_err());
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("events.jsonl");
        let tasks = vec![task("t1"), task("t2")];
        let (raw, decisions) = {
            let mut store = AnnotationStore::open(tasks.clone(), 3, &log).unwrap();
            panel(&mut store);
            for (a, c) in [("x", 1), ("y", 0), ("z", 0)] {
                store.submit(a, "t1", labels(c)).unwrap();
            }
            store.submit("x", "t2", labels(1)).unwrap();
            (store.export_raw(), store.export_decisions())
        };
        let mut again = AnnotationStore::open(tasks, 3, &log).unwrap();
        assert_eq!(again.export_raw(), raw);
        assert_eq!(again.export_decisions(), decisions);
        assert!(matches!(again.submit("x", "t2", labels(1)), Err(AnnotationError::Conflict { .. })));
        again.submit("y", "t2", labels(1)).unwrap();
        assert_eq!(again.progress().annotators["y"], 2);
    }

    #[test]
    fn raw_export_replays_to_same_decisions() {
        let mut store = AnnotationStore::in_memory(vec![task("t1"), task("t2")], 3).unwrap();
        panel(&mut store);
        for (a, c1, c2) in [("x", 1, 0), ("y", 0, 0), ("z", 1, 1)] {
            store.submit(a, "t1", labels(c1)).unwrap();
            store.submit(a, "t2", labels(c2)).unwrap();
        }
        let raw: Vec<AnnotationVote> = store.export_raw().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let replayed = decisions_from_votes(&raw).unwrap();
        let exported: Vec<Judgment> = store
            .export_decisions()
            .lines()
            .map(|l| crate::log::deserialize_judgment(l).unwrap())
            .collect();
        assert_eq!(replayed, exported);
        assert_eq!(exported.iter().map(|j| j.contradiction).collect::<Vec<_>>(), [true, false]);
    }
}

//! Bot-bot conversations with side-channel inquiries, and campaigns over all
//! ordered bot pairs.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::backends::{generate_reply, BackendError, ChatBackend};
use crate::inquirer::Inquirer;
use crate::log::{deserialize_dialogue, serialize_dialogue, LogError};
use crate::model::{validate_dialogue, BotId, Dialogue, GenerationConfig, InquiryPair, Role, Utterance, Violation};

#[derive(Clone)]
pub struct RegisteredBot {
    pub id: BotId,
    pub backend: Arc<dyn ChatBackend>,
}

impl RegisteredBot {
    pub fn new(id: BotId, backend: Arc<dyn ChatBackend>) -> Self {
        Self { id, backend }
    }
}

impl std::fmt::Debug for RegisteredBot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.id, self.backend.identity())
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate bot id `{0}`")]
    Duplicate(BotId),
    #[error("empty bot registry")]
    Empty,
}

/// Ordered bot pool. The order fixes the axes of every contradiction matrix.
#[derive(Debug, Clone)]
pub struct BotRegistry {
    bots: Vec<RegisteredBot>,
}

impl BotRegistry {
    pub fn new(bots: Vec<RegisteredBot>) -> Result<Self, RegistryError> {
        if bots.is_empty() {
            return Err(RegistryError::Empty);
        }
        let mut seen = HashSet::new();
        for b in &bots {
            if !seen.insert(b.id.clone()) {
                return Err(RegistryError::Duplicate(b.id.clone()));
            }
        }
        Ok(Self { bots })
    }

    pub fn bots(&self) -> &[RegisteredBot] {
        &self.bots
    }

    pub fn ids(&self) -> Vec<BotId> {
        self.bots.iter().map(|b| b.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.bots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bots.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("turn {turn}, {role}: {source}")]
    Backend {
        turn: u32,
        role: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("produced dialogue is invalid: {0:?}")]
    Invalid(Vec<Violation>),
}

fn backend_err(turn: u32, role: &'static str) -> impl FnOnce(BackendError) -> DialogueError {
    move |source| DialogueError::Backend { turn, role, source }
}

/// Runs one conversation of `cfg.max_turns` turns.
///
/// In each turn Chatbot1 and then Chatbot2 speak from the natural history.
/// If the inquirer finds an entity in Chatbot2's utterance, Chatbot2 answers
/// the question in a forked history (natural history plus the question);
/// neither the question nor the answer enters the natural history. All
/// randomness comes from a stream seeded with `seed`. Any backend failure
/// aborts the whole dialogue.
pub fn run_dialogue(
    bot1: &RegisteredBot,
    bot2: &RegisteredBot,
    inquirer: &Inquirer,
    cfg: &GenerationConfig,
    dialogue_id: impl Into<String>,
    seed: u64,
) -> Result<Dialogue, DialogueError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut natural: Vec<Utterance> = Vec::with_capacity(2 * cfg.max_turns as usize);
    let mut inquiries = Vec::new();

    for k in 1..=cfg.max_turns {
        let text = generate_reply(bot1.backend.as_ref(), &natural, cfg, &mut rng).map_err(backend_err(k, "bot1"))?;
        natural.push(Utterance::natural(Role::Bot1, k, &text));

        let text = generate_reply(bot2.backend.as_ref(), &natural, cfg, &mut rng).map_err(backend_err(k, "bot2"))?;
        let u2k = Utterance::natural(Role::Bot2, k, &text);
        natural.push(u2k.clone());

        let Some(draft) = inquirer.inquire(&u2k, &mut rng).map_err(backend_err(k, "inquirer"))? else {
            continue;
        };
        let question = Utterance::question(k, draft.question());
        let mut fork = natural.clone();
        fork.push(question.clone());
        let reply =
            generate_reply(bot2.backend.as_ref(), &fork, cfg, &mut rng).map_err(backend_err(k, "bot2 inquiry"))?;
        inquiries.push(InquiryPair {
            turn_k: k,
            source: u2k,
            entities: draft.entities,
            candidates: draft.candidates,
            question,
            response: Utterance::response(k, &reply),
        });
    }

    let dialogue = Dialogue {
        dialogue_id: dialogue_id.into(),
        bot1: bot1.id.clone(),
        bot2: bot2.id.clone(),
        turns: natural,
        inquiries,
        seed,
        config: *cfg,
    };
    let violations = validate_dialogue(&dialogue);
    if violations.is_empty() {
        Ok(dialogue)
    } else {
        Err(DialogueError::Invalid(violations))
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Dialogue seed for `(pair_index, ordinal, attempt)` within a campaign.
///
/// The triple is packed as `pair_index << 48 | attempt << 32 | ordinal`
/// (pair index and attempt truncated to 16 bits), XORed with the mixed
/// campaign seed and passed through the SplitMix64 finalizer. Every step is
/// a bijection on `u64`, so distinct triples never share a seed within a
/// campaign.
pub fn derive_dialogue_seed(campaign_seed: u64, pair_index: u32, ordinal: u32, attempt: u32) -> u64 {
    let key = ((pair_index as u64 & 0xffff) << 48) | ((attempt as u64 & 0xffff) << 32) | ordinal as u64;
    mix64(key ^ mix64(campaign_seed))
}

pub fn dialogue_id(bot1: &BotId, bot2: &BotId, ordinal: u32) -> String {
    format!("{bot1}-{bot2}-{ordinal:04}")
}

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub registry: BotRegistry,
    /// Dialogues per ordered pair (`M`).
    pub dialogues_per_pair: u32,
    pub cfg: GenerationConfig,
    pub include_self_pairs: bool,
    pub parallelism: usize,
    /// Extra attempts, each with a fresh derived seed, before a dialogue is
    /// reported as failed.
    pub retry_budget: u32,
}

impl CampaignSpec {
    pub fn new(registry: BotRegistry, cfg: GenerationConfig) -> Self {
        Self {
            registry,
            dialogues_per_pair: 200,
            cfg,
            include_self_pairs: true,
            parallelism: 4,
            retry_budget: 2,
        }
    }

    /// Ordered pairs `(pair_index, partner, evaluated)` in row-major order.
    pub fn pairs(&self) -> Vec<(u32, usize, usize)> {
        let n = self.registry.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| self.include_self_pairs || i != j)
            .map(|(i, j)| ((i * n + j) as u32, i, j))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CampaignFailure {
    pub bot1: BotId,
    pub bot2: BotId,
    pub ordinal: u32,
    pub attempts: u32,
    pub last_error: String,
}

#[derive(Debug, Default)]
pub struct CampaignOutcome {
    /// Completed dialogues sorted by (pair index, ordinal).
    pub dialogues: Vec<Dialogue>,
    pub failures: Vec<CampaignFailure>,
    /// Ordinals skipped because they were already done.
    pub skipped: usize,
}

/// Runs `M` dialogues for every ordered pair, skipping ids in `done`.
///
/// Dialogues run concurrently up to `spec.parallelism`; `on_dialogue` is
/// called once per completed dialogue, in completion order.
pub fn run_campaign(
    spec: &CampaignSpec,
    inquirer: &Inquirer,
    done: &HashSet<String>,
    on_dialogue: &(dyn Fn(&Dialogue) + Sync),
) -> CampaignOutcome {
    let bots = spec.registry.bots();
    let mut skipped = 0;
    let mut work = Vec::new();
    for (pair_index, i, j) in spec.pairs() {
        for ordinal in 0..spec.dialogues_per_pair {
            let id = dialogue_id(&bots[i].id, &bots[j].id, ordinal);
            if done.contains(&id) {
                skipped += 1;
            } else {
                work.push((pair_index, i, j, ordinal, id));
            }
        }
    }

    let run_one = |(pair_index, i, j, ordinal, id): &(u32, usize, usize, u32, String)| {
        let mut last_error = String::new();
        for attempt in 0..=spec.retry_budget {
            let seed = derive_dialogue_seed(spec.cfg.campaign_seed, *pair_index, *ordinal, attempt);
            match run_dialogue(&bots[*i], &bots[*j], inquirer, &spec.cfg, id.clone(), seed) {
                Ok(d) => {
                    on_dialogue(&d);
                    return Ok(((*pair_index, *ordinal), d));
                }
                Err(e) => {
                    tracing::warn!(bot1 = %bots[*i].id, bot2 = %bots[*j].id, seed, error = %e, "dialogue discarded");
                    last_error = e.to_string();
                }
            }
        }
        Err(CampaignFailure {
            bot1: bots[*i].id.clone(),
            bot2: bots[*j].id.clone(),
            ordinal: *ordinal,
            attempts: spec.retry_budget + 1,
            last_error,
        })
    };

    let results: Vec<_> = match rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| work.par_iter().map(run_one).collect()),
        Err(_) => work.iter().map(run_one).collect(),
    };

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(x) => completed.push(x),
            Err(f) => failures.push(f),
        }
    }
    completed.sort_by_key(|(key, _)| *key);
    CampaignOutcome {
        dialogues: completed.into_iter().map(|(_, d)| d).collect(),
        failures,
        skipped,
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runs a campaign appending dialogues to the JSONL log at `path`. Dialogue
/// ids already present in the log are skipped, so an interrupted campaign
/// resumes where it stopped.
pub fn run_campaign_to_log(spec: &CampaignSpec, inquirer: &Inquirer, path: &Path) -> Result<CampaignOutcome, CampaignError> {
    let mut done = HashSet::new();
    if path.exists() {
        for (idx, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let d = deserialize_dialogue(&line).map_err(|e| LogError::AtLine {
                line: idx + 1,
                source: Box::new(e),
            })?;
            done.insert(d.dialogue_id);
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let writer = Mutex::new(std::io::BufWriter::new(file));
    let write_error: Mutex<Option<std::io::Error>> = Mutex::new(None);
    let outcome = run_campaign(spec, inquirer, &done, &|d: &Dialogue| {
        let line = match serialize_dialogue(d) {
            Ok(line) => line,
            Err(e) => {
                tracing::error!(error = %e, "cannot serialize dialogue");
                return;
            }
        };
        let mut w = writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            write_error.lock().unwrap_or_else(|e| e.into_inner()).get_or_insert(e);
        }
    });
    if let Some(e) = write_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e.into());
    }
    Ok(outcome)
}

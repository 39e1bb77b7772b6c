//! Command-line entry point.
//!
//! Exit status: 0 on success, 1 when an input fails validation, 2 on a
//! runtime error, 64 on a usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};

use crate::annotation::{self, AnnotationStore};
use crate::backends::{NliBackend, RuleNli};
use crate::config::Config;
use crate::log::{read_dialogues, read_judgments, write_judgments, LogError};
use crate::metrics::{
    appropriateness_summary, inter_annotator, leave_one_out_stability, rank_bots, sample_sizes, stability_curve,
    tau_sweep, Aggregation, PairPools, PairTable, Report,
};
use crate::model::{BotId, Dialogue, Judgment, JudgmentSource};
use crate::orchestrator::run_campaign_to_log;
use crate::recognition::{judge_dialogues, Threshold};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "aih", version, about = "Chatbot consistency evaluation by entity inquiries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a bot-bot campaign and append dialogues to a log.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "dialogues.jsonl")]
        dialogues: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Score every inquiry pair of a dialogue log.
    Judge {
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long, default_value = "judgments.jsonl")]
        judgments: PathBuf,
        #[arg(long, default_value_t = Threshold::DEFAULT)]
        tau: f64,
        /// Config whose `[nli]` section selects the scorer; builtin otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Contradiction-rate matrix, overall rates and ranking.
    Rank {
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        /// Mean of per-dialogue rates instead of pooled counts.
        #[arg(long)]
        per_dialogue: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Ranking agreement under sub-sampling of dialogues.
    Stability {
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        /// Comma-separated reference order; defaults to the full-data ranking.
        #[arg(long, value_delimiter = ',')]
        reference: Option<Vec<String>>,
        #[arg(long, default_value_t = 10)]
        min: usize,
        #[arg(long, default_value_t = 200)]
        max: usize,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 1000)]
        repeats: usize,
        #[arg(long)]
        drop: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Automatic versus human agreement and inter-annotator agreement.
    Agreement {
        #[arg(long)]
        dialogues: PathBuf,
        /// Automatic judgments with stored scores.
        #[arg(long)]
        judgments: PathBuf,
        /// Decision export of the annotation service.
        #[arg(long)]
        annotations: PathBuf,
        /// Raw vote export, for question appropriateness.
        #[arg(long)]
        votes: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.15,0.3,0.5")]
        taus: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Sample dialogues per pair into an annotation task file.
    Sample {
        #[arg(long)]
        dialogues: PathBuf,
        #[arg(long, default_value = "tasks.jsonl")]
        tasks: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_pair: usize,
        #[arg(long, default_value_t = annotation::DEFAULT_CONTEXT_WINDOW)]
        context: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the annotation API and UI.
    Serve {
        #[arg(long)]
        tasks: PathBuf,
        /// Append-only event log, replayed at startup.
        #[arg(long, default_value = "annotation-events.jsonl")]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = annotation::DEFAULT_PANEL_SIZE)]
        panel: usize,
    },
    /// Check dialogue and judgment logs against the schema.
    Validate {
        #[arg(long)]
        dialogues: Option<PathBuf>,
        #[arg(long)]
        judgments: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<LogError> for Failure {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io(io) => Failure::Runtime(io.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn with_path(path: &Path) -> impl FnOnce(LogError) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Invalid(m) => Failure::Invalid(format!("{}: {m}", path.display())),
        Failure::Runtime(m) => Failure::Runtime(format!("{}: {m}", path.display())),
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s} (pass --seed {s} to reproduce)");
        s
    })
}

/// Bots in order of first appearance, as Chatbot1 then Chatbot2.
fn bots_of(dialogues: &[Dialogue]) -> Vec<BotId> {
    let mut bots: Vec<BotId> = Vec::new();
    for d in dialogues {
        for b in [&d.bot1, &d.bot2] {
            if !bots.contains(b) {
                bots.push(b.clone());
            }
        }
    }
    bots
}

fn load_pools(dialogues: &Path, judgments: &Path) -> Result<(Vec<Dialogue>, Vec<Judgment>, PairPools), Failure> {
    let ds = read_dialogues(dialogues).map_err(with_path(dialogues))?;
    let js = read_judgments(judgments).map_err(with_path(judgments))?;
    let pools = PairPools::from_judgments(&bots_of(&ds), &ds, &js).map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok((ds, js, pools))
}

fn parse_bots(names: &[String]) -> Result<Vec<BotId>, Failure> {
    names
        .iter()
        .map(|n| BotId::new(n.trim()).map_err(|e| Failure::Invalid(e.to_string())))
        .collect()
}

fn execute(command: Command, out: &mut String) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            dialogues,
            seed,
            parallel,
        } => {
            let cfg = Config::load(&config).map_err(Failure::runtime)?;
            let seed = seed_or_random(seed.or(cfg.campaign.seed));
            let mut spec = cfg.campaign(seed).map_err(Failure::runtime)?;
            if let Some(p) = parallel {
                spec.parallelism = p.max(1);
            }
            let inquirer = cfg.inquirer().map_err(Failure::runtime)?;
            let bots: Vec<String> = spec
                .registry
                .bots()
                .iter()
                .map(|b| format!("{}={}", b.id, b.backend.identity()))
                .collect();
            eprintln!(
                "backends: {}; ner={}; qg={}",
                bots.join(", "),
                inquirer.ner.identity(),
                inquirer.qg.identity()
            );
            let outcome = run_campaign_to_log(&spec, &inquirer, &dialogues).map_err(Failure::runtime)?;
            let _ = writeln!(
                out,
                "seed {seed}: {} dialogues written, {} already present, {} failed",
                outcome.dialogues.len(),
                outcome.skipped,
                outcome.failures.len()
            );
            for f in &outcome.failures {
                eprintln!("failed: {f:?}");
            }
            if !outcome.failures.is_empty() {
                return Err(Failure::Runtime(format!("{} dialogues failed", outcome.failures.len())));
            }
        }
        Command::Judge {
            dialogues,
            judgments,
            tau,
            config,
        } => {
            let threshold = Threshold::new(tau).map_err(|e| Failure::Invalid(e.to_string()))?;
            let nli: Arc<dyn NliBackend> = match config {
                Some(path) => Config::load(&path)
                    .and_then(|c| c.nli())
                    .map_err(Failure::runtime)?,
                None => Arc::new(RuleNli),
            };
            eprintln!("nli: {}", nli.identity());
            let ds = read_dialogues(&dialogues).map_err(with_path(&dialogues))?;
            let batch = judge_dialogues(&ds, nli.as_ref(), threshold);
            write_judgments(&judgments, &batch.judgments).map_err(with_path(&judgments))?;
            let positives = batch.judgments.iter().filter(|j| j.contradiction).count();
            let rate = if batch.judgments.is_empty() {
                0.0
            } else {
                positives as f64 / batch.judgments.len() as f64
            };
            let _ = writeln!(
                out,
                "judged {} inquiry pairs at tau {tau}: contradiction rate {rate:.3}, coverage {:.3}",
                batch.judgments.len(),
                batch.coverage()
            );
            for u in &batch.unscored {
                eprintln!("unscored {} turn {}: {}", u.dialogue_id, u.turn_k, u.error);
            }
        }
        Command::Rank {
            dialogues,
            judgments,
            per_dialogue,
            format,
        } => {
            let (_, _, pools) = load_pools(&dialogues, &judgments)?;
            let aggregation = if per_dialogue {
                Aggregation::PerDialogue
            } else {
                Aggregation::Pooled
            };
            let matrix = pools.matrix(aggregation);
            let overall = crate::metrics::overall_rates(&matrix.rate_grid()).map_err(|e| Failure::Invalid(e.to_string()))?;
            let ranking = rank_bots(&overall);
            let table = PairTable::from_matrix("Contradiction rate (rows: Chatbot1, columns: Chatbot2)", &matrix);
            match format {
                Format::Text => {
                    out.push_str(&table.to_text(3));
                    let _ = writeln!(out);
                    for (rank, bot) in ranking.order.iter().enumerate() {
                        let _ = writeln!(out, "{}. {bot} {:.3}", rank + 1, overall.get(bot.as_str()).unwrap_or(f64::NAN));
                    }
                    let names: Vec<&str> = ranking.order.iter().map(BotId::as_str).collect();
                    let _ = writeln!(out, "order: {}", names.join(", "));
                    for group in &ranking.ties {
                        let names: Vec<&str> = group.iter().map(BotId::as_str).collect();
                        let _ = writeln!(out, "tie: {}", names.join(", "));
                    }
                }
                Format::Csv => out.push_str(&table.to_csv()),
                Format::Json => {
                    let report = Report {
                        matrix: Some(matrix),
                        ranking: Some(ranking),
                        ..Report::default()
                    };
                    out.push_str(&report.to_json());
                    out.push('\n');
                }
            }
        }
        Command::Stability {
            dialogues,
            judgments,
            reference,
            min,
            max,
            step,
            repeats,
            drop,
            seed,
            format,
        } => {
            let (_, _, pools) = load_pools(&dialogues, &judgments)?;
            let reference = match reference {
                Some(names) => parse_bots(&names)?,
                None => {
                    let grid = pools.matrix(Aggregation::Pooled).rate_grid();
                    let overall = crate::metrics::overall_rates(&grid).map_err(|e| Failure::Invalid(e.to_string()))?;
                    rank_bots(&overall).order
                }
            };
            let s_values = sample_sizes(min, max, step);
            let seed = seed_or_random(seed);
            let curve = match drop {
                Some(name) => {
                    let dropped = BotId::new(name).map_err(|e| Failure::Invalid(e.to_string()))?;
                    leave_one_out_stability(&pools, &reference, &dropped, &s_values, repeats, seed)
                }
                None => stability_curve(&pools, &reference, &s_values, repeats, seed),
            }
            .map_err(|e| Failure::Invalid(e.to_string()))?;
            match format {
                Format::Json => {
                    let report = Report {
                        curves: vec![curve],
                        ..Report::default()
                    };
                    out.push_str(&report.to_json());
                    out.push('\n');
                }
                Format::Text | Format::Csv => {
                    let names: Vec<&str> = curve.reference.iter().map(BotId::as_str).collect();
                    let _ = writeln!(out, "# reference {}; repeats {}; seed {seed}", names.join(","), curve.repeats);
                    out.push_str("s,agreement\n");
                    for (s, a) in &curve.agreement {
                        let _ = writeln!(out, "{s},{a}");
                    }
                }
            }
        }
        Command::Agreement {
            dialogues,
            judgments,
            annotations,
            votes,
            taus,
            format,
        } => {
            let ds = read_dialogues(&dialogues).map_err(with_path(&dialogues))?;
            let auto = read_judgments(&judgments).map_err(with_path(&judgments))?;
            let human = read_judgments(&annotations).map_err(with_path(&annotations))?;
            if let Some(j) = auto.iter().find(|j| j.source != JudgmentSource::Auto) {
                return Err(Failure::Invalid(format!("{} holds a human judgment for {}", judgments.display(), j.dialogue_id)));
            }
            let bots = bots_of(&ds);
            let sweep = tau_sweep(&auto, &human, &taus).map_err(|e| Failure::Invalid(e.to_string()))?;
            let inter = inter_annotator(&bots, &ds, &human).map_err(|e| Failure::Invalid(e.to_string()))?;
            let appropriateness = match votes {
                Some(path) => {
                    let vs = annotation::read_votes(&path).map_err(|e| Failure::Invalid(e.to_string()))?;
                    Some(appropriateness_summary(&bots, &ds, &vs).map_err(|e| Failure::Invalid(e.to_string()))?)
                }
                None => None,
            };
            let fmt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
            match format {
                Format::Json => {
                    let report = Report {
                        agreement: sweep,
                        inter_annotator: Some(inter),
                        ..Report::default()
                    };
                    out.push_str(&report.to_json());
                    out.push('\n');
                }
                Format::Csv => {
                    out.push_str("tau,cr,f1,pearson_r,n\n");
                    for r in &sweep {
                        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                        let _ = writeln!(out, "{},{},{},{},{}", r.tau, r.contradiction_rate, f(r.f1), f(r.pearson_r), r.n);
                    }
                }
                Format::Text => {
                    let _ = writeln!(out, "{:>6}  {:>6}  {:>6}  {:>6}", "tau", "CR", "F1", "r");
                    for r in &sweep {
                        let _ = writeln!(
                            out,
                            "{:>6}  {:>6.3}  {:>6}  {:>6}",
                            r.tau,
                            r.contradiction_rate,
                            fmt(r.f1),
                            fmt(r.pearson_r)
                        );
                    }
                    let _ = writeln!(out, "\ninter-annotator agreement");
                    for (bot, r) in &inter.per_bot {
                        let _ = writeln!(out, "{bot}  {}", fmt(*r));
                    }
                    let _ = writeln!(out, "avg  {}", fmt(inter.average()));
                    for (bot, annotator) in &inter.excluded {
                        let _ = writeln!(out, "excluded: {annotator} on {bot} (constant labels)");
                    }
                    if let Some(s) = &appropriateness {
                        let _ = writeln!(out);
                        out.push_str(&s.appropriate.to_text(3));
                    }
                }
            }
        }
        Command::Sample {
            dialogues,
            tasks,
            per_pair,
            context,
            seed,
        } => {
            let ds = read_dialogues(&dialogues).map_err(with_path(&dialogues))?;
            let seed = seed_or_random(seed);
            let queue = annotation::enqueue_sample(&ds, per_pair, seed, context).map_err(|e| Failure::Invalid(e.to_string()))?;
            annotation::write_tasks(&tasks, &queue).map_err(Failure::runtime)?;
            let _ = writeln!(out, "{} tasks written to {} (seed {seed})", queue.len(), tasks.display());
        }
        Command::Serve {
            tasks,
            store,
            addr,
            static_dir,
            panel,
        } => {
            let queue = annotation::read_tasks(&tasks).map_err(|e| Failure::Invalid(e.to_string()))?;
            let store = AnnotationStore::open(queue, panel, &store).map_err(Failure::runtime)?;
            let app = annotation::server::router(Arc::new(Mutex::new(store)), static_dir);
            let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
            runtime
                .block_on(async {
                    let listener = tokio::net::TcpListener::bind(&addr).await?;
                    eprintln!("annotation service listening on http://{}", listener.local_addr()?);
                    annotation::server::serve(listener, app).await
                })
                .map_err(Failure::runtime)?;
        }
        Command::Validate { dialogues, judgments } => {
            if dialogues.is_none() && judgments.is_none() {
                return Err(Failure::Invalid("nothing to validate: pass --dialogues and/or --judgments".into()));
            }
            if let Some(path) = dialogues {
                let n = read_dialogues(&path).map_err(with_path(&path))?.len();
                let _ = writeln!(out, "{}: {n} dialogues ok", path.display());
            }
            if let Some(path) = judgments {
                let n = read_judgments(&path).map_err(with_path(&path))?.len();
                let _ = writeln!(out, "{}: {n} judgments ok", path.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Results go to stdout, diagnostics to stderr.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = String::new();
    let result = execute(cli.command, &mut out);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.as_bytes());
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

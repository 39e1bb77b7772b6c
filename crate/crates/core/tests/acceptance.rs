//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use aih::backends::{RuleNli, ScriptedBot, SyntheticContradictorBot};
use aih::config::default_vocabulary;
use aih::inquirer::Inquirer;
use aih::log::{serialize_dialogue, serialize_judgment};
use aih::metrics::{
    f1_score, inter_annotator, leave_one_out_stability, overall_rates, pair_rate, pearson, rank_bots, sample_sizes,
    stability_curve, tau_sweep, Aggregation, MetricsError, PairPools, RateGrid,
};
use aih::model::{BotId, Dialogue, GenerationConfig, Judgment, JudgmentSource, Role, Utterance, Vote};
use aih::orchestrator::{derive_dialogue_seed, dialogue_id, run_campaign, run_dialogue, BotRegistry, CampaignSpec, RegisteredBot};
use aih::recognition::{aggregate_votes, count_at, judge_dialogues, Threshold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const BOTS: [&str; 4] = ["BL", "PL", "DG", "DF"];
const GOLD: [&str; 4] = ["PL", "DG", "DF", "BL"];

/// Published automatic contradiction rates, tau = 0.15; row = Chatbot1
/// (partner), column = Chatbot2 (evaluated).
const AUTO: [[f64; 4]; 4] = [
    [0.431, 0.240, 0.324, 0.362],
    [0.431, 0.263, 0.293, 0.357],
    [0.425, 0.251, 0.344, 0.345],
    [0.427, 0.264, 0.344, 0.371],
];
const AUTO_AVG: [f64; 4] = [0.428, 0.255, 0.326, 0.359];

const HUMAN: [[f64; 4]; 4] = [
    [0.487, 0.282, 0.398, 0.396],
    [0.411, 0.212, 0.500, 0.435],
    [0.404, 0.211, 0.304, 0.431],
    [0.462, 0.268, 0.310, 0.377],
];
const HUMAN_AVG: [f64; 4] = [0.441, 0.243, 0.378, 0.410];

struct Outcome {
    pass: bool,
    detail: String,
}

fn ids(names: &[&str]) -> Vec<BotId> {
    names.iter().map(|n| BotId::new(*n).unwrap()).collect()
}

fn table3_aggregation() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, table, printed) in [("auto", AUTO, AUTO_AVG), ("human", HUMAN, HUMAN_AVG)] {
        let rows: Vec<Vec<f64>> = table.iter().map(|r| r.to_vec()).collect();
        let grid = RateGrid::from_rates(ids(&BOTS), &rows).unwrap();
        let overall = overall_rates(&grid).unwrap();
        let mut worst: f64 = 0.0;
        for (bot, expected) in BOTS.iter().zip(printed) {
            let diff = (overall.get(bot).unwrap() - expected).abs();
            worst = worst.max(diff);
            // tolerance of half a unit in the third decimal, with room for
            // the binary representation of the decimal inputs
            pass &= diff <= 0.0005 + 1e-12;
        }
        let ranking = rank_bots(&overall);
        let order_ok = ranking.order == ids(&GOLD) && !ranking.has_ties();
        pass &= order_ok;
        let order: Vec<&str> = ranking.order.iter().map(BotId::as_str).collect();
        detail.push(format!("{name}: max |C_j - printed| = {worst:.6}, order {}", order.join(" < ")));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    detail.push(format!("{elapsed:.2?}"));
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn threshold_boundary() -> Outcome {
    let th = Threshold::default();
    let tau = th.value();
    let eps = 1e-9;
    let at = Judgment::auto("d", 1, tau, tau).contradiction;
    let above = Judgment::auto("d", 1, tau + eps, tau).contradiction;
    let boundary_ok = !at && above && !th.decide(tau) && th.decide(tau + eps);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(0..60);
        let js: Vec<Judgment> = (0..n)
            .map(|k| Judgment::auto("d", k, rng.random_range(0.0..=1.0), tau))
            .collect();
        let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if count_at(&js, hi) > count_at(&js, lo) {
            violations += 1;
        }
    }
    Outcome {
        pass: boundary_ok && violations == 0,
        detail: format!("c(tau)={}, c(tau+1e-9)={}; monotonicity violations in 1000 sets: {violations}", u8::from(at), u8::from(above)),
    }
}

fn bare_dialogue(b1: &BotId, b2: &BotId, ordinal: u32) -> Dialogue {
    Dialogue {
        dialogue_id: dialogue_id(b1, b2, ordinal),
        bot1: b1.clone(),
        bot2: b2.clone(),
        turns: vec![Utterance::natural(Role::Bot1, 1, "Hi."), Utterance::natural(Role::Bot2, 1, "Hello.")],
        inquiries: vec![],
        seed: 0,
        config: GenerationConfig::default(),
    }
}

enum Oracle {
    Ranked(Vec<(BotId, f64)>, Vec<BotId>),
    Undefined,
}

/// Straight from the judgment lists: filter each pair's judgments, divide,
/// average each column, sort.
fn brute_force(bots: &[BotId], dialogues: &[Dialogue], judgments: &[Judgment]) -> (Vec<Vec<Option<f64>>>, Oracle) {
    let n = bots.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            let members: Vec<&str> = dialogues
                .iter()
                .filter(|d| d.bot1 == bots[i] && d.bot2 == bots[j])
                .map(|d| d.dialogue_id.as_str())
                .collect();
            if members.is_empty() {
                continue;
            }
            let pair: Vec<&Judgment> = judgments.iter().filter(|x| members.contains(&x.dialogue_id.as_str())).collect();
            let positives = pair.iter().filter(|x| x.contradiction).count();
            cells[i][j] = Some((!pair.is_empty()).then(|| positives as f64 / pair.len() as f64));
        }
    }
    let mut overall = Vec::new();
    for j in 0..n {
        let mut sum = 0.0;
        let mut count = 0;
        for row in &cells {
            match row[j] {
                Some(Some(r)) => {
                    sum += r;
                    count += 1;
                }
                Some(None) => return (flatten(&cells), Oracle::Undefined),
                None => {}
            }
        }
        overall.push((bots[j].clone(), sum / count as f64));
    }
    let mut order = overall.clone();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    (flatten(&cells), Oracle::Ranked(overall, order.into_iter().map(|(b, _)| b).collect()))
}

fn flatten(cells: &[Vec<Option<Option<f64>>>]) -> Vec<Vec<Option<f64>>> {
    cells.iter().map(|r| r.iter().map(|c| c.flatten()).collect()).collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    let mut undefined = 0;
    for campaign in 0..100 {
        let n = rng.random_range(2..=4);
        let bots: Vec<BotId> = (0..n).map(|i| BotId::new(format!("B{i}")).unwrap()).collect();
        let mut dialogues = Vec::new();
        let mut judgments = Vec::new();
        for b1 in &bots {
            for b2 in &bots {
                for m in 0..rng.random_range(1..=10) {
                    let d = bare_dialogue(b1, b2, m);
                    for k in 1..=rng.random_range(0..=6) {
                        judgments.push(Judgment::auto(&d.dialogue_id, k, rng.random_range(0.0..=1.0), 0.15));
                    }
                    dialogues.push(d);
                }
            }
        }
        let pools = PairPools::from_judgments(&bots, &dialogues, &judgments).unwrap();
        let matrix = pools.matrix(Aggregation::Pooled);
        let cells: Vec<Vec<Option<f64>>> = matrix.cells.iter().map(|r| r.iter().map(|c| c.and_then(|c| c.rate)).collect()).collect();
        let (oracle_cells, oracle) = brute_force(&bots, &dialogues, &judgments);
        if cells != oracle_cells {
            mismatches.push(format!("campaign {campaign}: matrix"));
            continue;
        }
        match (overall_rates(&matrix.rate_grid()), oracle) {
            (Ok(overall), Oracle::Ranked(expected, order)) => {
                if overall.0 != expected {
                    mismatches.push(format!("campaign {campaign}: overall"));
                } else if rank_bots(&overall).order != order {
                    mismatches.push(format!("campaign {campaign}: ranking"));
                }
            }
            (Err(MetricsError::UndefinedCell { .. }), Oracle::Undefined) => undefined += 1,
            _ => mismatches.push(format!("campaign {campaign}: undefined-cell handling")),
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!("100 campaigns identical ({undefined} with an undefined cell on both sides)")
        } else {
            mismatches.join(", ")
        },
    }
}

/// Pools of 200 dialogues per ordered pair, generated end to end with
/// synthetic bots whose contradiction probability is the published rate of
/// the pair, 5 inquiries per dialogue, judged by the builtin scorer.
fn synthetic_table3_pools() -> PairPools {
    let bots = ids(&BOTS);
    let cfg = GenerationConfig {
        max_turns: 5,
        campaign_seed: 2022,
        ..GenerationConfig::default()
    };
    let inquirer = Inquirer::builtin();
    let vocab = default_vocabulary();
    let jobs: Vec<(usize, usize, u32)> = (0..4).flat_map(|i| (0..4).flat_map(move |j| (0..200).map(move |m| (i, j, m)))).collect();
    let dialogues: Vec<Dialogue> = jobs
        .par_iter()
        .map(|&(i, j, m)| {
            let bot = |k: usize, p: f64| {
                RegisteredBot::new(
                    bots[k].clone(),
                    Arc::new(SyntheticContradictorBot::new(BOTS[k], p, vocab.clone()).unwrap()),
                )
            };
            let seed = derive_dialogue_seed(cfg.campaign_seed, (i * 4 + j) as u32, m, 0);
            let id = dialogue_id(&bots[i], &bots[j], m);
            run_dialogue(&bot(i, 0.0), &bot(j, AUTO[i][j]), &inquirer, &cfg, id, seed).unwrap()
        })
        .collect();
    let batch = judge_dialogues(&dialogues, &RuleNli, Threshold::default());
    assert!(batch.unscored.is_empty());
    PairPools::from_judgments(&bots, &dialogues, &batch.judgments).unwrap()
}

fn stability_reproduction() -> Outcome {
    let start = Instant::now();
    let pools = synthetic_table3_pools();
    let inquiries: usize = pools.pools().values().flatten().map(|t| t.inquiries).sum();
    let gold = ids(&GOLD);
    let s_values = sample_sizes(10, 200, 10);
    let full = stability_curve(&pools, &gold, &s_values, 1000, 11).unwrap();
    let drop_dg = leave_one_out_stability(&pools, &gold, &BotId::new("DG").unwrap(), &s_values, 1000, 12).unwrap();
    let drop_df = leave_one_out_stability(&pools, &gold, &BotId::new("DF").unwrap(), &s_values, 1000, 13).unwrap();
    let nondecreasing = |c: &aih::metrics::StabilityCurve| c.agreement.windows(2).all(|w| w[1].1 >= w[0].1 - 0.02);
    let a100 = full.at(100).unwrap();
    let dg50 = drop_dg.at(50).unwrap();
    let df50 = drop_df.at(50).unwrap();
    let monotone = nondecreasing(&full) && nondecreasing(&drop_dg) && nondecreasing(&drop_df);
    let elapsed = start.elapsed();
    Outcome {
        pass: inquiries == 16 * 200 * 5 && a100 >= 0.92 && dg50 >= 0.92 && df50 >= 0.92 && monotone && elapsed < Duration::from_secs(120),
        detail: format!(
            "{inquiries} inquiries; agreement(100)={a100:.3}, drop DG agreement(50)={dg50:.3}, drop DF agreement(50)={df50:.3}, nondecreasing within 0.02: {monotone}; {elapsed:.2?}"
        ),
    }
}

fn scripted_registry() -> BotRegistry {
    let a = ScriptedBot::new(
        "A",
        vec![
            "Hi! I just came back from London.".into(),
            "Do you like Star Wars?".into(),
            "I have two cats.".into(),
        ],
    )
    .unwrap()
    .with_inquiry_reply("London", "I have never been to London.");
    let b = ScriptedBot::new(
        "B",
        vec![
            "I would love to visit New York next year.".into(),
            "Metallica is my favorite band.".into(),
            "I work on Monday.".into(),
        ],
    )
    .unwrap()
    .with_inquiry_reply("New York", "Yes, New York is on my list.")
    .with_inquiry_reply("Metallica", "I do not like Metallica.");
    BotRegistry::new(vec![
        RegisteredBot::new(BotId::new("A").unwrap(), Arc::new(a)),
        RegisteredBot::new(BotId::new("B").unwrap(), Arc::new(b)),
    ])
    .unwrap()
}

fn deterministic_run(dir: &std::path::Path, tag: &str) -> (String, String, Vec<u8>) {
    let cfg = GenerationConfig {
        max_turns: 15,
        campaign_seed: 99,
        ..GenerationConfig::default()
    };
    let mut spec = CampaignSpec::new(scripted_registry(), cfg);
    spec.dialogues_per_pair = 5;
    let log = dir.join(format!("{tag}.jsonl"));
    let outcome = aih::orchestrator::run_campaign_to_log(&spec, &Inquirer::builtin(), &log).unwrap();
    assert!(outcome.failures.is_empty());
    let dialogues: String = outcome.dialogues.iter().map(|d| serialize_dialogue(d).unwrap() + "\n").collect();
    let batch = judge_dialogues(&outcome.dialogues, &RuleNli, Threshold::default());
    let judgments: String = batch.judgments.iter().map(|j| serialize_judgment(j).unwrap() + "\n").collect();
    let mut file_lines: Vec<String> = std::fs::read_to_string(&log).unwrap().lines().map(String::from).collect();
    file_lines.sort();
    (dialogues, judgments, file_lines.join("\n").into_bytes())
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let first = deterministic_run(dir.path(), "first");
    let second = deterministic_run(dir.path(), "second");
    let elapsed = start.elapsed();
    let n = first.0.lines().count();
    let inquiries: usize = first.1.lines().count();
    Outcome {
        pass: first == second && n == 20 && inquiries > 0 && elapsed < Duration::from_secs(5),
        detail: format!("{n} dialogues, {inquiries} judgments, logs identical: {}; {elapsed:.2?}", first == second),
    }
}

fn human(labels: &[bool]) -> Vec<Judgment> {
    labels
        .iter()
        .zip(1..)
        .map(|(&c, k)| Judgment {
            dialogue_id: "H-H-0000".into(),
            turn_k: k,
            score: None,
            contradiction: c,
            tau: None,
            source: JudgmentSource::Human,
            votes: None,
        })
        .collect()
}

fn bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

fn as_f64(v: &[bool]) -> Vec<f64> {
    v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn agreement_statistics() -> Outcome {
    let mut checks = Vec::new();
    let identical = bits("1101001101");
    checks.push((
        "identical",
        f1_score(&identical, &identical) == Some(1.0) && pearson(&as_f64(&identical), &as_f64(&identical)) == Some(1.0),
    ));
    let (all, half) = (bits("1111111111"), bits("1111100000"));
    checks.push((
        "all-positive vs half",
        f1_score(&all, &half) == Some(2.0 / 3.0) && pearson(&as_f64(&all), &as_f64(&half)).is_none(),
    ));
    let (p, q) = (bits("1010101010"), bits("0101010101"));
    checks.push(("complements", f1_score(&p, &q) == Some(0.0) && pearson(&as_f64(&p), &as_f64(&q)) == Some(-1.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scores: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..=1.0)).collect();
    let auto: Vec<Judgment> = scores.iter().zip(1..).map(|(&s, k)| Judgment::auto("H-H-0000", k, s, 0.15)).collect();
    let truth: Vec<bool> = scores.iter().map(|&s| s > 0.4).collect();
    let sweep = tau_sweep(&auto, &human(&truth), &[0.0, 0.1, 0.15, 0.3, 0.5, 0.9]).unwrap();
    checks.push(("tau sweep CR nonincreasing", sweep.windows(2).all(|w| w[1].contradiction_rate <= w[0].contradiction_rate)));

    let b = BotId::new("H").unwrap();
    let dialogue = bare_dialogue(&b, &b, 0);
    let voted: Vec<Judgment> = [[1u8, 1, 1], [0, 0, 0], [1, 1, 1], [0, 0, 0]]
        .iter()
        .zip(1..)
        .map(|(labels, k)| {
            let votes = labels.iter().zip(["x", "y", "z"]).map(|(&label, a)| Vote { annotator: a.into(), label }).collect();
            aggregate_votes(&dialogue.dialogue_id, k, votes).unwrap()
        })
        .collect();
    let inter = inter_annotator(std::slice::from_ref(&b), &[dialogue], &voted).unwrap();
    checks.push(("inter-annotator unanimous", inter.per_bot == vec![(b, Some(1.0))]));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks exact", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    }
}

fn synthetic_rate_recovery() -> Outcome {
    let p = 0.3;
    let id = BotId::new("S").unwrap();
    let bot = SyntheticContradictorBot::new("S", p, default_vocabulary()).unwrap();
    let registry = BotRegistry::new(vec![RegisteredBot::new(id, Arc::new(bot))]).unwrap();
    let mut spec = CampaignSpec::new(
        registry,
        GenerationConfig {
            campaign_seed: 30,
            ..GenerationConfig::default()
        },
    );
    spec.dialogues_per_pair = 200;
    let outcome = run_campaign(&spec, &Inquirer::builtin(), &Default::default(), &|_| {});
    let batch = judge_dialogues(&outcome.dialogues, &RuleNli, Threshold::default());
    let cell = pair_rate(&batch.judgments);
    let rate = cell.rate.unwrap_or(f64::NAN);
    let sigma = (p * (1.0 - p) / cell.inquiries as f64).sqrt();
    let z = (rate - p) / sigma;
    Outcome {
        pass: outcome.dialogues.len() == 200 && batch.unscored.is_empty() && z.abs() <= 3.0,
        detail: format!("{} dialogues, {} inquiries, rate {rate:.4}, sigma {sigma:.4}, z {z:+.2}", outcome.dialogues.len(), cell.inquiries),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("table3_aggregation", table3_aggregation),
        ("threshold_boundary", threshold_boundary),
        ("oracle_equivalence", oracle_equivalence),
        ("stability_reproduction", stability_reproduction),
        ("end_to_end_determinism", end_to_end_determinism),
        ("agreement_statistics", agreement_statistics),
        ("synthetic_rate_recovery", synthetic_rate_recovery),
    ];
    let mut results = BTreeMap::new();
    for (name, check) in criteria {
        let outcome = check();
        println!("{} {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        results.insert(name, outcome.pass);
    }
    let failed = results.values().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

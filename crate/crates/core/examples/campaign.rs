//! A full campaign from a TOML configuration: every ordered pair, judged by
//! the builtin scorer, summarized as a rate table and a ranking.

use aih::config::Config;
use aih::metrics::{overall_rates, rank_bots, Aggregation, PairPools, PairTable};
use aih::recognition::{judge_dialogues, Threshold};

const CONFIG: &str = r#"
[campaign]
dialogues_per_pair = 20
max_turns = 15
seed = 3

[[bots]]
id = "steady"
kind = "synthetic"
contradiction_prob = 0.1

[[bots]]
id = "wobbly"
kind = "synthetic"
contradiction_prob = 0.5

[[bots]]
id = "scripted"
kind = "scripted"
lines = ["I grew up in Madrid.", "I watched Star Wars yesterday.", "My brother works at Google."]
inquiry_replies = [
    { contains = "Madrid", reply = "I have never been to Madrid." },
    { contains = "Star Wars", reply = "Yes, I saw Star Wars again." },
    { contains = "Google", reply = "Google, where my brother works." },
]
default_reply = "I already told you."
"#;

fn main() {
    let config = Config::parse(CONFIG).expect("valid configuration");
    let spec = config.campaign(3).unwrap();
    let outcome = aih::orchestrator::run_campaign(&spec, &config.inquirer().unwrap(), &Default::default(), &|_| {});
    println!("{} dialogues, {} failures", outcome.dialogues.len(), outcome.failures.len());

    let nli = config.nli().unwrap();
    let batch = judge_dialogues(&outcome.dialogues, nli.as_ref(), Threshold::default());
    let bots = spec.registry.ids();
    let pools = PairPools::from_judgments(&bots, &outcome.dialogues, &batch.judgments).unwrap();
    let matrix = pools.matrix(Aggregation::Pooled);
    println!("{}", PairTable::from_matrix("contradiction rate", &matrix).to_text(3));

    let ranking = rank_bots(&overall_rates(&matrix.rate_grid()).unwrap());
    let order: Vec<&str> = ranking.order.iter().map(|b| b.as_str()).collect();
    println!("most consistent first: {}", order.join(", "));
}

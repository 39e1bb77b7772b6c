//! Two bots talk for a few turns while the inquirer questions the second bot
//! in a forked history. Prints the natural transcript, then the side channel.

use std::sync::Arc;

use aih::backends::{ScriptedBot, SyntheticContradictorBot};
use aih::config::default_vocabulary;
use aih::inquirer::Inquirer;
use aih::model::{BotId, GenerationConfig};
use aih::orchestrator::{run_dialogue, RegisteredBot};

fn main() {
    let host = ScriptedBot::new(
        "host",
        vec![
            "Hi! I spent last summer in Rome.".into(),
            "Have you read Harry Potter?".into(),
            "My sister lives in Berlin.".into(),
        ],
    )
    .expect("script is not empty");
    let guest = SyntheticContradictorBot::new("guest", 0.4, default_vocabulary()).expect("valid probability");

    let bot1 = RegisteredBot::new(BotId::new("host").unwrap(), Arc::new(host));
    let bot2 = RegisteredBot::new(BotId::new("guest").unwrap(), Arc::new(guest));
    let cfg = GenerationConfig {
        max_turns: 6,
        ..GenerationConfig::default()
    };
    let dialogue = run_dialogue(&bot1, &bot2, &Inquirer::builtin(), &cfg, "host-guest-0000", 7).expect("builtin backends do not fail");

    for u in &dialogue.turns {
        println!("{:>5} {:>2}: {}", u.speaker.as_str(), u.turn_index, u.text);
    }
    println!("\ninquiries ({} of {} turns):", dialogue.inquiries.len(), cfg.max_turns);
    for p in &dialogue.inquiries {
        println!("  k={} Q: {}", p.turn_k, p.question.text);
        println!("       A: {}", p.response.text);
    }
}

//! Agreement between automatic and human contradiction labels across
//! thresholds, and per-annotator agreement with the majority.

use aih::metrics::{f1_score, inter_annotator, pearson, tau_sweep};
use aih::model::{BotId, Dialogue, GenerationConfig, Judgment, JudgmentSource, Role, Utterance, Vote};
use aih::recognition::aggregate_votes;

fn main() {
    let predicted = [true, true, false, true, false, false];
    let truth = [true, false, false, true, true, false];
    let as_f64 = |v: &[bool]| v.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<_>>();
    println!("F1 {:?}, r {:?}", f1_score(&predicted, &truth), pearson(&as_f64(&predicted), &as_f64(&truth)));

    let scores = [0.05, 0.12, 0.18, 0.40, 0.75, 0.92, 0.10, 0.55];
    let human_labels = [false, false, true, true, true, true, false, false];
    let auto: Vec<Judgment> = scores.iter().zip(1..).map(|(&s, k)| Judgment::auto("A-B-0000", k, s, 0.15)).collect();
    let human: Vec<Judgment> = human_labels
        .iter()
        .zip(1..)
        .map(|(&c, k)| Judgment {
            dialogue_id: "A-B-0000".into(),
            turn_k: k,
            score: None,
            contradiction: c,
            tau: None,
            source: JudgmentSource::Human,
            votes: None,
        })
        .collect();
    println!("\ntau   CR     F1     r");
    for r in tau_sweep(&auto, &human, &[0.1, 0.15, 0.3, 0.5]).unwrap() {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<5} {:.3}  {}  {}", r.tau, r.contradiction_rate, show(r.f1), show(r.pearson_r));
    }

    let bot = BotId::new("B").unwrap();
    let dialogue = Dialogue {
        dialogue_id: "A-B-0000".into(),
        bot1: BotId::new("A").unwrap(),
        bot2: bot.clone(),
        turns: vec![Utterance::natural(Role::Bot1, 1, "Hi."), Utterance::natural(Role::Bot2, 1, "Hello.")],
        inquiries: vec![],
        seed: 0,
        config: GenerationConfig::default(),
    };
    let panels = [[1, 1, 0], [0, 0, 0], [1, 1, 1], [0, 1, 0], [1, 0, 1]];
    let voted: Vec<Judgment> = panels
        .iter()
        .zip(1..)
        .map(|(labels, k)| {
            let votes = labels.iter().zip(["ann1", "ann2", "ann3"]).map(|(&label, a)| Vote { annotator: a.into(), label }).collect();
            aggregate_votes("A-B-0000", k, votes).unwrap()
        })
        .collect();
    let report = inter_annotator(&[bot], &[dialogue], &voted).unwrap();
    println!("\ninter-annotator: {:?}", report.per_bot);
}

//! Serves an annotation queue over HTTP and labels it with three scripted
//! annotators, then prints the majority decisions.
//!
//! Pass `--keep` to leave the server running on 127.0.0.1:8080 instead.

use std::sync::{Arc, Mutex};

use aih::annotation::server::{router, serve};
use aih::annotation::{enqueue_sample, AnnotationStore, AnnotationTask, DEFAULT_CONTEXT_WINDOW, DEFAULT_PANEL_SIZE};
use aih::backends::SyntheticContradictorBot;
use aih::config::default_vocabulary;
use aih::inquirer::Inquirer;
use aih::model::{BotId, GenerationConfig};
use aih::orchestrator::{run_campaign, BotRegistry, CampaignSpec, RegisteredBot};
use serde_json::json;

fn main() {
    let bot = SyntheticContradictorBot::new("S", 0.5, default_vocabulary()).unwrap();
    let registry = BotRegistry::new(vec![RegisteredBot::new(BotId::new("S").unwrap(), Arc::new(bot))]).unwrap();
    let mut spec = CampaignSpec::new(registry, GenerationConfig { max_turns: 3, ..GenerationConfig::default() });
    spec.dialogues_per_pair = 2;
    let dialogues = run_campaign(&spec, &Inquirer::builtin(), &Default::default(), &|_| {}).dialogues;
    let tasks = enqueue_sample(&dialogues, 2, 0, DEFAULT_CONTEXT_WINDOW).unwrap();
    println!("{} tasks queued", tasks.len());

    let store = Arc::new(Mutex::new(AnnotationStore::in_memory(tasks, DEFAULT_PANEL_SIZE).unwrap()));
    let keep = std::env::args().any(|a| a == "--keep");
    let addr = if keep { "127.0.0.1:8080" } else { "127.0.0.1:0" };
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr)).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(store, None);
    if keep {
        println!("listening on {base}");
        runtime.block_on(serve(listener, app)).unwrap();
        return;
    }
    runtime.spawn(async move { axum::serve(listener, app).await });

    let http = reqwest::blocking::Client::new();
    for (n, name) in ["ann1", "ann2", "ann3"].iter().enumerate() {
        http.post(format!("{base}/api/annotators")).json(&json!({ "id": name })).send().unwrap();
        loop {
            let r = http.get(format!("{base}/api/tasks/next?annotator={name}")).send().unwrap();
            if r.status() == reqwest::StatusCode::NO_CONTENT {
                break;
            }
            let task: AnnotationTask = r.json().unwrap();
            let contradictory = u8::from(task.display.response.contains("did not") || n == 0);
            let body = json!({ "annotator": name, "question_appropriate": 1, "answer_relevant": 1, "contradictory": contradictory });
            http.post(format!("{base}/api/tasks/{}/submit", task.task_id)).json(&body).send().unwrap();
        }
    }
    print!("{}", http.get(format!("{base}/api/export?kind=decisions")).send().unwrap().text().unwrap());
}

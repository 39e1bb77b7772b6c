//! Remote chat, NER, question and NLI clients against a local stand-in for
//! the model services. Pass a base URL to talk to real services instead.

use std::sync::Arc;

use aih::backends::wire::*;
use aih::backends::{GazetteerNer, HostLimits, RemoteChat, RemoteEndpoint, RemoteNer, RemoteNli, RemoteQuestions, RuleNli, TemplateQuestions};
use aih::inquirer::Inquirer;
use aih::model::{BotId, GenerationConfig, Role};
use aih::orchestrator::{run_dialogue, RegisteredBot};
use aih::recognition::{judge_dialogues, Threshold};
use axum::routing::{get, post};
use axum::{Json, Router};

async fn generate(Json(req): Json<GenerateRequest>) -> Json<GenerateResponse> {
    let asked = req.history.last().is_some_and(|h| h.speaker == Role::Inquirer);
    let text = if asked { "I have never been there." } else { "I went to Lisbon with Maria." };
    Json(GenerateResponse { text: text.into() })
}

async fn ner(Json(req): Json<NerRequest>) -> Json<NerResponse> {
    Json(NerResponse {
        entities: GazetteerNer::default().extract_entities(&req.text),
    })
}

async fn qg(Json(req): Json<QgRequest>) -> Json<QgResponse> {
    let entity = GazetteerNer::default().extract_entities(&req.answer).into_iter().next();
    let question = entity.map_or_else(|| format!("What about {}?", req.answer), |e| TemplateQuestions::render(&e));
    Json(QgResponse { question })
}

async fn nli(Json(req): Json<NliRequest>) -> Json<NliResponse> {
    let c = RuleNli::score(&req.premise, &req.hypothesis).unwrap_or(0.0);
    Json(NliResponse { contradiction: c, neutral: None, entailment: None })
}

fn stand_in() -> String {
    let app = Router::new()
        .route(GENERATE_PATH, post(generate))
        .route(NER_PATH, post(ner))
        .route(QG_PATH, post(qg))
        .route(NLI_PATH, post(nli))
        .route(HEALTH_PATH, get(|| async { "ok" }));
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn main() {
    let url = std::env::args().nth(1).unwrap_or_else(stand_in);
    let limits = HostLimits::new(4);
    let endpoint = || RemoteEndpoint::new(&url, &limits).expect("valid URL");
    let bot = |name: &str| RegisteredBot::new(BotId::new(name).unwrap(), Arc::new(RemoteChat::new(name, endpoint())));
    let inquirer = Inquirer::new(Arc::new(RemoteNer::new(endpoint())), Arc::new(RemoteQuestions::new(endpoint())));
    let cfg = GenerationConfig {
        max_turns: 4,
        ..GenerationConfig::default()
    };
    let d = run_dialogue(&bot("R1"), &bot("R2"), &inquirer, &cfg, "R1-R2-0000", 1).expect("services reachable");
    let batch = judge_dialogues(std::slice::from_ref(&d), &RemoteNli::new("remote-nli", endpoint()), Threshold::default());
    for (p, j) in d.inquiries.iter().zip(&batch.judgments) {
        println!("k={} {} / {} -> y={:.2} {}", p.turn_k, p.question.text, p.response.text, j.score.unwrap(), j.contradiction);
    }
}

//! JSON bodies of the model-service protocol.
//!
//! | endpoint            | request                              | response                                      |
//! |---------------------|--------------------------------------|-----------------------------------------------|
//! | `POST /v1/generate` | `{"history":[{speaker,text}],"nucleus_p"}` | `{"text"}`                              |
//! | `POST /v1/ner`      | `{"text"}`                           | `{"entities":[{surface,label,start,end}]}`    |
//! | `POST /v1/qg`       | `{"context","answer"}`               | `{"question"}`                                |
//! | `POST /v1/nli`      | `{"premise","hypothesis"}`           | `{"contradiction","neutral","entailment"}`    |

use serde::{Deserialize, Serialize};

use crate::model::{Entity, Role};

pub const GENERATE_PATH: &str = "/v1/generate";
pub const NER_PATH: &str = "/v1/ner";
pub const QG_PATH: &str = "/v1/qg";
pub const NLI_PATH: &str = "/v1/nli";
pub const HEALTH_PATH: &str = "/healthz";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub speaker: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub history: Vec<HistoryItem>,
    pub nucleus_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerResponse {
    pub entities: Vec<Entity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgRequest {
    pub context: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgResponse {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub premise: String,
    pub hypothesis: String,
}

/// Three-way NLI distribution. Only `contradiction` is consumed; the other
/// two are kept for logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliResponse {
    pub contradiction: f64,
    #[serde(default)]
    pub neutral: Option<f64>,
    #[serde(default)]
    pub entailment: Option<f64>,
}

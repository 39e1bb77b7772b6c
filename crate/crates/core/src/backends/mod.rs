//! Model capabilities behind uniform interfaces: chat generation, named
//! entity recognition, question generation and NLI contradiction scoring.
//!
//! Each capability has a remote HTTP client ([`remote`]) and a deterministic
//! builtin that needs no model weights ([`builtin`], [`scripted`],
//! [`synthetic`]).

use rand::RngCore;
use thiserror::Error;

use crate::model::{Entity, GenerationConfig, Utterance};

pub mod builtin;
pub mod remote;
pub mod scripted;
pub mod synthetic;
pub mod wire;

pub use builtin::{Gazetteer, GazetteerNer, RuleNli, TemplateQuestions};
pub use remote::{HostLimits, RemoteChat, RemoteEndpoint, RemoteNer, RemoteNli, RemoteQuestions, RetryPolicy};
pub use scripted::ScriptedBot;
pub use synthetic::SyntheticContradictorBot;

#[derive(Debug, Error)]
pub enum BackendError {
    /// Transport failure or non-2xx status after all retries.
    #[error("{endpoint}: request failed after {attempts} attempt(s): {message}")]
    Request {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    /// The service answered but the body broke the wire contract.
    #[error("protocol violation from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
}

impl BackendError {
    pub fn attempts(&self) -> Option<u32> {
        match self {
            BackendError::Request { attempts, .. } => Some(*attempts),
            _ => None,
        }
    }
}

/// A chatbot taking part in a bot-bot conversation.
///
/// `history` holds the visible utterances in speaking order. When the last
/// entry is spoken by the inquirer, the call answers an inquiry. Builtin
/// implementations draw all randomness from `rng`, so identical inputs and
/// stream state give identical replies.
pub trait ChatBackend: Send + Sync {
    fn identity(&self) -> &str;

    fn generate(
        &self,
        history: &[Utterance],
        cfg: &GenerationConfig,
        rng: &mut dyn RngCore,
    ) -> Result<String, BackendError>;
}

pub trait NerBackend: Send + Sync {
    fn identity(&self) -> &str;

    fn extract(&self, text: &str) -> Result<Vec<Entity>, BackendError>;
}

pub trait QuestionBackend: Send + Sync {
    fn identity(&self) -> &str;

    /// Generates a question whose answer is `entity`, given the utterance it
    /// was found in.
    fn question(&self, context: &str, entity: &Entity) -> Result<String, BackendError>;
}

/// Contradiction scorer `y = f(premise, hypothesis)` with output in `[0, 1]`.
pub trait NliBackend: Send + Sync {
    /// Provenance of the evaluator, e.g. a model checkpoint name.
    fn identity(&self) -> &str;

    fn contradiction(&self, premise: &str, hypothesis: &str) -> Result<f64, BackendError>;
}

/// Asks `backend` for the next utterance and rejects empty replies.
pub fn generate_reply(
    backend: &dyn ChatBackend,
    history: &[Utterance],
    cfg: &GenerationConfig,
    rng: &mut dyn RngCore,
) -> Result<String, BackendError> {
    let text = backend.generate(history, cfg, rng)?;
    if text.trim().is_empty() {
        return Err(BackendError::Protocol {
            endpoint: backend.identity().to_string(),
            message: "empty reply".into(),
        });
    }
    Ok(text)
}

//! Test double that replays a fixed script.

use rand::RngCore;

use super::{BackendError, ChatBackend};
use crate::model::{GenerationConfig, Role, Utterance};

/// Replays `script` line by line, cycling when exhausted.
///
/// The script position is derived from the history (turn `k` uses line
/// `k - 1`, modulo the script length), so the bot keeps no state between
/// calls and can serve many dialogues at once. Inquiries are answered from
/// `inquiry_replies`: the first entry whose key occurs in the question,
/// case-insensitively, else `default_reply`.
#[derive(Debug, Clone)]
pub struct ScriptedBot {
    name: String,
    script: Vec<String>,
    inquiry_replies: Vec<(String, String)>,
    default_reply: String,
}

impl ScriptedBot {
    pub fn new(name: impl Into<String>, script: Vec<String>) -> Result<Self, BackendError> {
        if script.is_empty() || script.iter().any(|l| l.trim().is_empty()) {
            return Err(BackendError::Argument("script must be nonempty with nonempty lines".into()));
        }
        Ok(Self {
            name: name.into(),
            script,
            inquiry_replies: Vec::new(),
            default_reply: "I am not sure.".into(),
        })
    }

    pub fn with_inquiry_reply(mut self, question_substring: impl Into<String>, reply: impl Into<String>) -> Self {
        self.inquiry_replies.push((question_substring.into(), reply.into()));
        self
    }

    pub fn with_default_reply(mut self, reply: impl Into<String>) -> Self {
        self.default_reply = reply.into();
        self
    }

    fn inquiry_reply(&self, question: &str) -> &str {
        let q = question.to_lowercase();
        self.inquiry_replies
            .iter()
            .find(|(key, _)| q.contains(&key.to_lowercase()))
            .map(|(_, reply)| reply.as_str())
            .unwrap_or(&self.default_reply)
    }
}

impl ChatBackend for ScriptedBot {
    fn identity(&self) -> &str {
        &self.name
    }

    fn generate(
        &self,
        history: &[Utterance],
        _cfg: &GenerationConfig,
        _rng: &mut dyn RngCore,
    ) -> Result<String, BackendError> {
        if let Some(last) = history.last().filter(|u| u.speaker == Role::Inquirer) {
            return Ok(self.inquiry_reply(&last.text).to_string());
        }
        let natural = history.iter().filter(|u| u.speaker != Role::Inquirer).count();
        Ok(self.script[(natural / 2) % self.script.len()].clone())
    }
}

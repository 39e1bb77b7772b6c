//! TOML campaign configuration.
//!
//! ```toml
//! [campaign]
//! dialogues_per_pair = 200
//! max_turns = 15
//! nucleus_p = 0.9
//! seed = 7
//!
//! [[bots]]
//! id = "BL"
//! kind = "http"
//! url = "http://127.0.0.1:8001"
//!
//! [[bots]]
//! id = "S1"
//! kind = "synthetic"
//! contradiction_prob = 0.3
//!
//! [inquirer]
//! ner = { kind = "builtin" }
//! qg = { kind = "http", url = "http://127.0.0.1:8011" }
//!
//! [nli]
//! kind = "builtin"
//! ```

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::backends::{
    BackendError, ChatBackend, GazetteerNer, HostLimits, NerBackend, NliBackend, QuestionBackend, RemoteChat,
    RemoteEndpoint, RemoteNer, RemoteNli, RemoteQuestions, RetryPolicy, RuleNli, ScriptedBot,
    SyntheticContradictorBot, TemplateQuestions,
};
use crate::inquirer::Inquirer;
use crate::model::{BotId, EntityLabel, GenerationConfig};
use crate::orchestrator::{BotRegistry, CampaignSpec, RegisteredBot, RegistryError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub campaign: CampaignSection,
    pub bots: Vec<BotSection>,
    #[serde(default)]
    pub inquirer: InquirerSection,
    #[serde(default)]
    pub nli: Component,
    #[serde(default)]
    pub http: HttpSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub dialogues_per_pair: u32,
    pub max_turns: u32,
    pub nucleus_p: f64,
    pub include_self_pairs: bool,
    pub parallelism: usize,
    pub retry_budget: u32,
    pub seed: Option<u64>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        let g = GenerationConfig::default();
        Self {
            dialogues_per_pair: 200,
            max_turns: g.max_turns,
            nucleus_p: g.nucleus_p,
            include_self_pairs: true,
            parallelism: 4,
            retry_budget: 2,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InquiryReply {
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BotKind {
    Http {
        url: String,
    },
    Scripted {
        lines: Vec<String>,
        #[serde(default)]
        inquiry_replies: Vec<InquiryReply>,
        default_reply: Option<String>,
    },
    Synthetic {
        contradiction_prob: f64,
        /// Defaults to the builtin gazetteer's place, person, organization
        /// and title entries.
        vocabulary: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct BotSection {
    pub id: String,
    #[serde(flatten)]
    pub kind: BotKind,
}

/// A builtin component or a remote service speaking the wire protocol.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Component {
    #[default]
    Builtin,
    Http {
        url: String,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InquirerSection {
    pub ner: Component,
    pub qg: Component,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpSection {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    pub per_host_connections: usize,
}

impl Default for HttpSection {
    fn default() -> Self {
        let r = RetryPolicy::default();
        Self {
            max_attempts: r.max_attempts,
            initial_backoff_ms: r.initial_backoff.as_millis() as u64,
            timeout_secs: 60,
            per_host_connections: 4,
        }
    }
}

/// Entity surfaces used by synthetic bots when no vocabulary is configured.
pub fn default_vocabulary() -> Vec<String> {
    GazetteerNer::default().gazetteer().surfaces(Some(&[
        EntityLabel::Gpe,
        EntityLabel::Person,
        EntityLabel::Org,
        EntityLabel::WorkOfArt,
    ]))
}

struct Remote {
    limits: HostLimits,
    retry: RetryPolicy,
    timeout: Duration,
}

impl Remote {
    fn endpoint(&self, url: &str) -> Result<RemoteEndpoint, BackendError> {
        RemoteEndpoint::with_options(url, &self.limits, self.retry, self.timeout)
    }
}

impl Config {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(source)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let violations = self.generation(0).violations();
        if let Some(v) = violations.first() {
            return Err(ConfigError::Invalid(v.to_string()));
        }
        if self.campaign.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be positive".into()));
        }
        if self.http.max_attempts == 0 || self.http.per_host_connections == 0 {
            return Err(ConfigError::Invalid("http limits must be positive".into()));
        }
        Ok(())
    }

    pub fn generation(&self, campaign_seed: u64) -> GenerationConfig {
        GenerationConfig {
            max_turns: self.campaign.max_turns,
            nucleus_p: self.campaign.nucleus_p,
            campaign_seed,
        }
    }

    fn remote(&self) -> Remote {
        Remote {
            limits: HostLimits::new(self.http.per_host_connections),
            retry: RetryPolicy {
                max_attempts: self.http.max_attempts,
                initial_backoff: Duration::from_millis(self.http.initial_backoff_ms),
                ..RetryPolicy::default()
            },
            timeout: Duration::from_secs(self.http.timeout_secs),
        }
    }

    pub fn registry(&self) -> Result<BotRegistry, ConfigError> {
        let remote = self.remote();
        let mut bots = Vec::new();
        for b in &self.bots {
            let id = BotId::new(b.id.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let backend: Arc<dyn ChatBackend> = match &b.kind {
                BotKind::Http { url } => Arc::new(RemoteChat::new(b.id.clone(), remote.endpoint(url)?)),
                BotKind::Scripted {
                    lines,
                    inquiry_replies,
                    default_reply,
                } => {
                    let mut bot = ScriptedBot::new(b.id.clone(), lines.clone())?;
                    for r in inquiry_replies {
                        bot = bot.with_inquiry_reply(r.contains.clone(), r.reply.clone());
                    }
                    if let Some(d) = default_reply {
                        bot = bot.with_default_reply(d.clone());
                    }
                    Arc::new(bot)
                }
                BotKind::Synthetic {
                    contradiction_prob,
                    vocabulary,
                } => Arc::new(SyntheticContradictorBot::new(
                    b.id.clone(),
                    *contradiction_prob,
                    vocabulary.clone().unwrap_or_else(default_vocabulary),
                )?),
            };
            bots.push(RegisteredBot::new(id, backend));
        }
        Ok(BotRegistry::new(bots)?)
    }

    pub fn inquirer(&self) -> Result<Inquirer, ConfigError> {
        let remote = self.remote();
        let ner: Arc<dyn NerBackend> = match &self.inquirer.ner {
            Component::Builtin => Arc::new(GazetteerNer::default()),
            Component::Http { url } => Arc::new(RemoteNer::new(remote.endpoint(url)?)),
        };
        let qg: Arc<dyn QuestionBackend> = match &self.inquirer.qg {
            Component::Builtin => Arc::new(TemplateQuestions),
            Component::Http { url } => Arc::new(RemoteQuestions::new(remote.endpoint(url)?)),
        };
        Ok(Inquirer::new(ner, qg))
    }

    pub fn nli(&self) -> Result<Arc<dyn NliBackend>, ConfigError> {
        Ok(match &self.nli {
            Component::Builtin => Arc::new(RuleNli),
            Component::Http { url } => Arc::new(RemoteNli::new(url.clone(), self.remote().endpoint(url)?)),
        })
    }

    pub fn campaign(&self, campaign_seed: u64) -> Result<CampaignSpec, ConfigError> {
        let mut spec = CampaignSpec::new(self.registry()?, self.generation(campaign_seed));
        spec.dialogues_per_pair = self.campaign.dialogues_per_pair;
        spec.include_self_pairs = self.campaign.include_self_pairs;
        spec.parallelism = self.campaign.parallelism;
        spec.retry_budget = self.campaign.retry_budget;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        [campaign]
        dialogues_per_pair = 3
        max_turns = 4
        seed = 11

        [[bots]]
        id = "A"
        kind = "scripted"
        lines = ["I love Paris."]
        inquiry_replies = [{ contains = "Paris", reply = "Never heard of it." }]

        [[bots]]
        id = "B"
        kind = "synthetic"
        contradiction_prob = 0.5

        [[bots]]
        id = "C"
        kind = "http"
        url = "http://127.0.0.1:9"

        [nli]
        kind = "http"
        url = "http://127.0.0.1:9"
    "#;

    #[test]
    fn parses_every_backend_kind() {
        let cfg = Config::parse(SAMPLE).unwrap();
        assert_eq!(cfg.campaign.seed, Some(11));
        assert_eq!(cfg.campaign.nucleus_p, 0.9);
        let spec = cfg.campaign(11).unwrap();
        assert_eq!(spec.registry.len(), 3);
        assert_eq!(spec.dialogues_per_pair, 3);
        assert_eq!(spec.cfg.max_turns, 4);
        assert_eq!(cfg.nli().unwrap().identity(), "http://127.0.0.1:9");
        assert_eq!(cfg.inquirer().unwrap().ner.identity(), GazetteerNer::default().identity());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("bots = []\n[campaign]\nnucleus_p = 1.5").is_err());
        assert!(Config::parse("bots = []\n[campaign]\nmax_turn = 3").is_err());
        let bad_kind = "[[bots]]\nid = \"A\"\nkind = \"telepathy\"";
        assert!(Config::parse(bad_kind).is_err());
        let dup = "[[bots]]\nid = \"A\"\nkind = \"scripted\"\nlines = [\"x\"]\n[[bots]]\nid = \"A\"\nkind = \"scripted\"\nlines = [\"y\"]";
        assert!(matches!(Config::parse(dup).unwrap().registry(), Err(ConfigError::Registry(_))));
    }

    #[test]
    fn default_vocabulary_is_recognized() {
        let vocab = default_vocabulary();
        assert!(vocab.len() > 20);
        let ner = GazetteerNer::default();
        assert!(vocab.iter().all(|v| !ner.extract_entities(v).is_empty()));
    }
}

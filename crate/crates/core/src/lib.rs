//! Consistency evaluation for open-domain chatbots.
//!
//! Two bots converse; after each utterance of the evaluated bot an inquirer
//! asks about an entity it mentioned, in a side channel the conversation never
//! sees. Each `(utterance, answer)` pair is scored for contradiction, and
//! per-pair contradiction rates are averaged into a ranking.

pub mod annotation;
pub mod backends;
pub mod cli;
pub mod config;
pub mod inquirer;
pub mod log;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod recognition;

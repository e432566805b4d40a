//! Critical-question generation for argumentative texts.
//!
//! Each intervention goes through three model-driven stages: arguments are
//! extracted against argumentation-scheme templates, critical questions are
//! generated from each scheme's question templates, and a fresh ranking
//! session picks the most helpful ones. Stages talk to any [`chat::ChatBackend`];
//! the scripted backend makes whole runs reproducible offline.

pub mod catalog;
pub mod chat;
pub mod config;
pub mod dataset;
pub mod dialogue;
pub mod events;
pub mod extraction;
pub mod generation;
pub mod parse;
pub mod pipeline;
pub mod prompts;
pub mod ranking;
pub mod report;

pub use catalog::{Catalog, ErMode, SchemeGroup, SchemeResolution, SchemeTemplate};
pub use chat::{ChatBackend, ChatSession, Message, Role, SessionTag};
pub use config::{Profile, PromptMode, RankingPrompt, RunConfig};
pub use dataset::{Intervention, SubmissionEntry};
pub use generation::CriticalQuestion;
pub use pipeline::{process_intervention, run_dataset, RunSummary};

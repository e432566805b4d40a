//! The extraction/generation conversation for one intervention.
//!
//! In conversational mode every turn is appended to one session, and the
//! intervention text opens the first user turn. In direct mode every turn is
//! a standalone system + user request; extraction replies collected so far
//! are inlined under a heading in later generation requests.

use serde_json::json;
use thiserror::Error;

use crate::chat::{send, BackendError, ChatBackend, ChatSession, SessionTag};
use crate::events::{EventKind, EventLog, Stage};
use crate::prompts::{intervention_block, EXTRACTED_HEADING};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage:?} turn {turn}: {source}")]
    Backend {
        stage: Stage,
        turn: usize,
        #[source]
        source: BackendError,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialogueMode {
    Conversational,
    Direct,
}

pub struct Dialogue<'a> {
    backend: &'a dyn ChatBackend,
    mode: DialogueMode,
    system_prompt: String,
    scope: String,
    intervention_text: String,
    session: ChatSession,
    presented: bool,
    extracted: Vec<String>,
    sends: usize,
}

impl<'a> Dialogue<'a> {
    pub fn new(
        backend: &'a dyn ChatBackend,
        mode: DialogueMode,
        system_prompt: &str,
        scope: &str,
        intervention_text: &str,
    ) -> Self {
        Self {
            backend,
            mode,
            system_prompt: system_prompt.to_string(),
            scope: scope.to_string(),
            intervention_text: intervention_text.to_string(),
            session: Self::fresh(scope, system_prompt),
            presented: false,
            extracted: Vec::new(),
            sends: 0,
        }
    }

    fn fresh(scope: &str, system_prompt: &str) -> ChatSession {
        ChatSession::with_system(SessionTag::ExtractionGeneration, scope, system_prompt)
    }

    pub fn mode(&self) -> DialogueMode {
        self.mode
    }

    pub fn intervention_text(&self) -> &str {
        &self.intervention_text
    }

    /// The conversational session, or the most recent standalone request in
    /// direct mode.
    pub fn session(&self) -> &ChatSession {
        &self.session
    }

    /// Backend calls issued through this dialogue.
    pub fn sends(&self) -> usize {
        self.sends
    }

    fn user_text(&mut self, stage: Stage, prompt: &str) -> String {
        match self.mode {
            DialogueMode::Conversational => {
                if self.presented {
                    prompt.to_string()
                } else {
                    self.presented = true;
                    format!("{}{prompt}", intervention_block(&self.intervention_text))
                }
            }
            DialogueMode::Direct => {
                // the top-up template carries the intervention itself
                let mut text = if stage == Stage::TopUp {
                    String::new()
                } else {
                    intervention_block(&self.intervention_text)
                };
                if stage != Stage::Extraction && !self.extracted.is_empty() {
                    text.push_str(EXTRACTED_HEADING);
                    text.push('\n');
                    text.push_str(&self.extracted.join("\n\n"));
                    text.push_str("\n\n");
                }
                text.push_str(prompt);
                text
            }
        }
    }

    /// Sends one turn and returns `(user_text, reply)`.
    pub fn ask(
        &mut self,
        events: &mut EventLog,
        stage: Stage,
        turn: usize,
        prompt: &str,
    ) -> Result<(String, String), StageError> {
        let user_text = self.user_text(stage, prompt);
        if self.mode == DialogueMode::Direct {
            self.session = Self::fresh(&self.scope, &self.system_prompt);
        }
        events.record(
            stage,
            EventKind::Request,
            json!({
                "tag": self.session.tag(),
                "turn": turn,
                "message_count": self.session.len() + 1,
                "user_text": user_text,
            }),
        );
        self.sends += 1;
        let reply = send(&mut self.session, &user_text, self.backend).map_err(|source| {
            StageError::Backend {
                stage,
                turn,
                source,
            }
        })?;
        events.record(
            stage,
            EventKind::Reply,
            json!({ "turn": turn, "text": reply }),
        );
        if stage == Stage::Extraction {
            self.extracted.push(reply.clone());
        }
        Ok((user_text, reply))
    }

    /// Records the final shape of the conversational session.
    pub fn record_summary(&self, events: &mut EventLog) {
        if self.mode == DialogueMode::Conversational {
            events.record(
                Stage::Pipeline,
                EventKind::Session,
                json!({
                    "tag": self.session.tag(),
                    "message_count": self.session.len(),
                    "turns": self.session.turns(),
                }),
            );
        }
    }
}

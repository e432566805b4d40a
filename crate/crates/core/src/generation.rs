//! Critical-question generation and the top-up turn.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{SchemeResolution, SchemeTemplate};
use crate::dialogue::{Dialogue, StageError};
use crate::events::{EventKind, EventLog, Stage};
use crate::parse::parse_cq_list;
use crate::prompts::{fill, CQ_GENERATION_PROMPT, NO_CQ_TEMPLATE, TOP_UP_PROMPT};

/// `source_scheme` of questions produced without a scheme template.
pub const TEMPLATE_FREE: &str = "template_free";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalQuestion {
    pub id: usize,
    pub text: String,
    pub source_scheme: String,
    pub origin_turn: usize,
}

/// Questions gathered for one intervention, numbered in arrival order.
#[derive(Debug, Clone, Default)]
pub struct QuestionPool {
    questions: Vec<CriticalQuestion>,
    seen: HashSet<String>,
    turns: usize,
}

fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl QuestionPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `texts` from one turn, dropping exact duplicates (case and
    /// whitespace insensitive). Returns how many were added.
    pub fn add_turn<S: AsRef<str>>(&mut self, texts: &[S], source_scheme: &str) -> usize {
        let turn = self.turns;
        self.turns += 1;
        let before = self.questions.len();
        for text in texts {
            let text = text.as_ref().trim();
            if text.is_empty() || !self.seen.insert(normalize(text)) {
                continue;
            }
            self.questions.push(CriticalQuestion {
                id: self.questions.len(),
                text: text.to_string(),
                source_scheme: source_scheme.to_string(),
                origin_turn: turn,
            });
        }
        self.questions.len() - before
    }

    pub fn questions(&self) -> &[CriticalQuestion] {
        &self.questions
    }

    pub fn into_questions(self) -> Vec<CriticalQuestion> {
        self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    /// Generation turns issued so far, including empty ones.
    pub fn turns(&self) -> usize {
        self.turns
    }
}

/// Generation prompt for one scheme. Schemes without a usable critical-question
/// template get the no-template sentence in place of the template block.
pub fn build_cq_prompt(resolution: &SchemeResolution) -> String {
    cq_prompt_for(resolution.cq_template())
}

fn cq_prompt_for(template: Option<&SchemeTemplate>) -> String {
    let block = match template {
        Some(t) => t.render_cq_block().trim_end().to_string(),
        None => NO_CQ_TEMPLATE.to_string(),
    };
    fill(CQ_GENERATION_PROMPT, &[("cq_template", &block)])
}

/// One generation turn per distinct templated scheme, in first-seen order,
/// then one shared turn for everything without a template. An empty scheme
/// list yields a single template-free turn.
pub fn plan_generation(resolutions: &[SchemeResolution]) -> Vec<Option<SchemeTemplate>> {
    let mut seen = HashSet::new();
    let mut plan: Vec<Option<SchemeTemplate>> = resolutions
        .iter()
        .filter_map(SchemeResolution::cq_template)
        .filter(|t| seen.insert(t.name.clone()))
        .cloned()
        .map(Some)
        .collect();
    if resolutions.is_empty() || resolutions.iter().any(|r| r.cq_template().is_none()) {
        plan.push(None);
    }
    plan
}

/// Sends one question-producing turn, resending it once if the reply has no
/// parseable list. `None` means both replies were unusable.
fn ask_for_questions(
    dialogue: &mut Dialogue<'_>,
    events: &mut EventLog,
    stage: Stage,
    turn: usize,
    prompt: &str,
) -> Result<Option<Vec<String>>, StageError> {
    for attempt in 0..2 {
        let (_, reply) = dialogue.ask(events, stage, turn, prompt)?;
        match parse_cq_list(&reply) {
            Ok(questions) => return Ok(Some(questions)),
            Err(failure) => events.record(
                stage,
                EventKind::ParseFailure,
                json!({ "turn": turn, "attempt": attempt, "reason": failure.reason }),
            ),
        }
    }
    events.warn(
        stage,
        format!("turn {turn}: no parseable question list after retry; no questions taken"),
    );
    Ok(None)
}

pub fn run_generation(
    dialogue: &mut Dialogue<'_>,
    events: &mut EventLog,
    resolutions: &[SchemeResolution],
    pool: &mut QuestionPool,
) -> Result<(), StageError> {
    for template in plan_generation(resolutions) {
        let prompt = cq_prompt_for(template.as_ref());
        let source = template.as_ref().map_or(TEMPLATE_FREE, |t| t.name.as_str());
        let turn = pool.turns();
        let texts = ask_for_questions(dialogue, events, Stage::Generation, turn, &prompt)?;
        pool.add_turn(&texts.unwrap_or_default(), source);
    }
    Ok(())
}

/// Issues the single top-up turn when fewer than `k` questions exist.
/// Returns whether the turn was issued.
pub fn ensure_minimum(
    dialogue: &mut Dialogue<'_>,
    events: &mut EventLog,
    pool: &mut QuestionPool,
    k: usize,
) -> Result<bool, StageError> {
    if k == 0 {
        return Err(StageError::Usage("k must be at least 1".into()));
    }
    if pool.len() >= k {
        return Ok(false);
    }
    let prompt = fill(
        TOP_UP_PROMPT,
        &[("intervention", dialogue.intervention_text())],
    );
    let turn = pool.turns();
    let texts = ask_for_questions(dialogue, events, Stage::TopUp, turn, &prompt)?;
    pool.add_turn(&texts.unwrap_or_default(), TEMPLATE_FREE);
    if pool.len() < k {
        events.warn(
            Stage::TopUp,
            format!("only {} question(s) after top-up, {k} wanted", pool.len()),
        );
    }
    Ok(true)
}

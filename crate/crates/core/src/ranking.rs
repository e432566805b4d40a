//! Listwise ranking of candidate questions in a fresh session.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::json;

use crate::chat::{send, ChatBackend, ChatSession, SessionTag};
use crate::config::RankingPrompt;
use crate::dialogue::StageError;
use crate::events::{EventKind, EventLog, Stage};
use crate::generation::CriticalQuestion;
use crate::parse::parse_ranking;
use crate::prompts::{fill, CANDIDATES_HEADING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "repair", content = "id", rename_all = "snake_case")]
pub enum Repair {
    InvalidIdDropped(i64),
    DuplicateDropped(i64),
    Backfilled(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingResult {
    pub requested_ids: Vec<i64>,
    pub selected: Vec<CriticalQuestion>,
    pub repairs: Vec<Repair>,
}

pub fn build_ranking_prompt(
    intervention_text: &str,
    candidates: &[CriticalQuestion],
    variant: RankingPrompt,
) -> Result<String, StageError> {
    if candidates.is_empty() {
        return Err(StageError::Usage(
            "ranking needs at least one candidate".into(),
        ));
    }
    let mut block = format!("{intervention_text}\n\n{CANDIDATES_HEADING}\n");
    for (i, q) in candidates.iter().enumerate() {
        if i > 0 {
            block.push('\n');
        }
        block.push_str(&format!("{}. {}", q.id, q.text));
    }
    Ok(fill(variant.template(), &[("intervention", &block)]))
}

/// Keeps the first occurrence of each valid ranked id until `k` are chosen,
/// then backfills with unchosen candidates in ascending id order.
pub fn select_top_k(
    candidates: &[CriticalQuestion],
    ranked_ids: &[i64],
    k: usize,
) -> RankingResult {
    let want = k.min(candidates.len());
    let mut chosen: Vec<usize> = Vec::with_capacity(want);
    let mut taken = HashSet::new();
    let mut repairs = Vec::new();
    for &id in ranked_ids {
        if chosen.len() == want {
            break;
        }
        let Some(pos) = usize::try_from(id)
            .ok()
            .and_then(|id| candidates.iter().position(|q| q.id == id))
        else {
            repairs.push(Repair::InvalidIdDropped(id));
            continue;
        };
        if taken.insert(pos) {
            chosen.push(pos);
        } else {
            repairs.push(Repair::DuplicateDropped(id));
        }
    }
    if chosen.len() < want {
        let mut rest: Vec<usize> = (0..candidates.len())
            .filter(|p| !taken.contains(p))
            .collect();
        rest.sort_by_key(|&p| candidates[p].id);
        for pos in rest.into_iter().take(want - chosen.len()) {
            repairs.push(Repair::Backfilled(candidates[pos].id));
            chosen.push(pos);
        }
    }
    RankingResult {
        requested_ids: ranked_ids.to_vec(),
        selected: chosen.into_iter().map(|p| candidates[p].clone()).collect(),
        repairs,
    }
}

/// Ranking parameters shared by every intervention in a run.
#[derive(Debug, Clone, Copy)]
pub struct RankingSetup<'a> {
    pub system_prompt: &'a str,
    pub variant: RankingPrompt,
    pub k: usize,
}

/// Asks for a ranking in a new session, resending once in another new
/// session if the reply has no id list; falls back to ascending ids.
pub fn run_ranking(
    backend: &dyn ChatBackend,
    events: &mut EventLog,
    scope: &str,
    intervention_text: &str,
    candidates: &[CriticalQuestion],
    setup: RankingSetup<'_>,
) -> Result<RankingResult, StageError> {
    let prompt = build_ranking_prompt(intervention_text, candidates, setup.variant)?;
    let mut ranked = None;
    for attempt in 0..2 {
        let mut session = ChatSession::with_system(SessionTag::Ranking, scope, setup.system_prompt);
        events.record(
            Stage::Ranking,
            EventKind::Request,
            json!({
                "tag": SessionTag::Ranking,
                "turn": 0,
                "message_count": session.len() + 1,
                "user_text": prompt,
            }),
        );
        let reply = send(&mut session, &prompt, backend).map_err(|source| StageError::Backend {
            stage: Stage::Ranking,
            turn: attempt,
            source,
        })?;
        events.record(
            Stage::Ranking,
            EventKind::Reply,
            json!({ "turn": 0, "text": reply }),
        );
        match parse_ranking(&reply) {
            Ok(ids) => {
                ranked = Some(ids);
                break;
            }
            Err(failure) => events.record(
                Stage::Ranking,
                EventKind::ParseFailure,
                json!({ "attempt": attempt, "reason": failure.reason }),
            ),
        }
    }
    let ranked = ranked.unwrap_or_else(|| {
        events.warn(
            Stage::Ranking,
            "no parseable ranking after retry; using id order",
        );
        Vec::new()
    });
    let result = select_top_k(candidates, &ranked, setup.k);
    for repair in &result.repairs {
        events.record(Stage::Ranking, EventKind::Repair, json!(repair));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands(n: usize) -> Vec<CriticalQuestion> {
        (0..n)
            .map(|i| CriticalQuestion {
                id: i,
                text: format!("Question {i}?"),
                source_scheme: "s".into(),
                origin_turn: 0,
            })
            .collect()
    }

    fn ids(r: &RankingResult) -> Vec<usize> {
        r.selected.iter().map(|q| q.id).collect()
    }

    #[test]
    fn clean_selection() {
        let r = select_top_k(&cands(5), &[2, 0, 4], 3);
        assert_eq!(ids(&r), vec![2, 0, 4]);
        assert!(r.repairs.is_empty());
    }

    #[test]
    fn repairs_invalid_duplicate_and_backfill() {
        let r = select_top_k(&cands(4), &[7, 2, 2, 3], 3);
        assert_eq!(ids(&r), vec![2, 3, 0]);
        assert_eq!(
            r.repairs,
            vec![
                Repair::InvalidIdDropped(7),
                Repair::DuplicateDropped(2),
                Repair::Backfilled(0)
            ]
        );
    }

    #[test]
    fn empty_ranking_backfills_everything() {
        let r = select_top_k(&cands(2), &[], 3);
        assert_eq!(ids(&r), vec![0, 1]);
        assert_eq!(
            r.repairs,
            vec![Repair::Backfilled(0), Repair::Backfilled(1)]
        );
    }

    #[test]
    fn negative_ids_are_invalid() {
        let r = select_top_k(&cands(3), &[-1, 1], 1);
        assert_eq!(ids(&r), vec![1]);
        assert_eq!(r.repairs, vec![Repair::InvalidIdDropped(-1)]);
    }

    #[test]
    fn prompt_lists_candidates() {
        let prompt = build_ranking_prompt("Text.", &cands(3), RankingPrompt::Tuned).unwrap();
        assert!(prompt.starts_with(
            "Text.\n\nCritical questions:\n0. Question 0?\n1. Question 1?\n2. Question 2?\n\n"
        ));
        assert!(prompt
            .contains("Return ONLY the question id in a Python list:\n```python\n[id_1, ...]"));
    }

    #[test]
    fn braces_in_intervention_are_literal() {
        let prompt =
            build_ranking_prompt("a {intervention} b {x}", &cands(1), RankingPrompt::Tuned)
                .unwrap();
        assert!(prompt.starts_with("a {intervention} b {x}\n"));
        assert!(prompt.contains("Rank and select top three most helpful critical questions."));
    }

    #[test]
    fn empty_candidates_rejected() {
        assert!(build_ranking_prompt("t", &[], RankingPrompt::Tuned).is_err());
    }
}

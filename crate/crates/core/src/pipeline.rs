//! Per-intervention orchestration and dataset runs.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::json;
use thiserror::Error;

use crate::catalog::{resolve_scheme, Catalog, SchemeResolution};
use crate::chat::{send, ChatBackend, ChatSession, SessionTag};
use crate::config::{ConfigError, PromptMode, RunConfig};
use crate::dataset::{
    load_interventions, write_submission, DatasetError, Intervention, SubmissionEntry,
};
use crate::dialogue::{Dialogue, DialogueMode, StageError};
use crate::events::{EventKind, EventLog, RunEvent, RunLogWriter, Stage};
use crate::extraction::{plan_batches, run_extraction};
use crate::generation::{ensure_minimum, run_generation, QuestionPool, TEMPLATE_FREE};
use crate::parse::parse_cq_list;
use crate::prompts::fill;
use crate::ranking::{run_ranking, RankingSetup};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("run log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct InterventionOutcome {
    pub intervention_id: String,
    pub entry: Option<SubmissionEntry>,
    pub events: Vec<RunEvent>,
    pub error: Option<String>,
}

impl InterventionOutcome {
    pub fn warnings(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.event == EventKind::Warning)
            .count()
    }
}

/// Distinct scheme names in first-seen order, resolved against the catalog.
fn resolve_distinct(
    names: &[String],
    catalog: &Catalog,
    config: &RunConfig,
) -> Vec<SchemeResolution> {
    let mut seen = std::collections::HashSet::new();
    let mut ordered: Vec<&str> = names
        .iter()
        .map(String::as_str)
        .filter(|n| seen.insert(*n))
        .collect();
    if config.sort_schemes {
        ordered.sort_unstable();
    }
    ordered
        .into_iter()
        .map(|n| resolve_scheme(n, catalog, config.er_mode))
        .collect()
}

fn staged(
    intervention: &Intervention,
    catalog: &Catalog,
    config: &RunConfig,
    backend: &dyn ChatBackend,
    events: &mut EventLog,
) -> Result<SubmissionEntry, StageError> {
    let mode = match config.prompt_mode {
        PromptMode::Direct => DialogueMode::Direct,
        _ => DialogueMode::Conversational,
    };
    let mut dialogue = Dialogue::new(
        backend,
        mode,
        &config.system_prompt,
        &intervention.id,
        &intervention.text,
    );
    let batches = plan_batches(&intervention.scheme_names, catalog, config);
    run_extraction(&mut dialogue, events, &batches)?;

    let resolutions = resolve_distinct(&intervention.scheme_names, catalog, config);
    let mut pool = QuestionPool::new();
    run_generation(&mut dialogue, events, &resolutions, &mut pool)?;
    ensure_minimum(&mut dialogue, events, &mut pool, config.rank_k)?;
    dialogue.record_summary(events);

    if pool.is_empty() {
        events.warn(Stage::Ranking, "no candidate questions; nothing to rank");
        return Ok(SubmissionEntry::new(&intervention.id, Vec::<String>::new()));
    }
    let setup = RankingSetup {
        system_prompt: &config.system_prompt,
        variant: config.ranking_prompt,
        k: config.rank_k,
    };
    let ranking = run_ranking(
        backend,
        events,
        &intervention.id,
        &intervention.text,
        pool.questions(),
        setup,
    )?;
    Ok(SubmissionEntry::new(
        &intervention.id,
        ranking.selected.into_iter().map(|q| q.text),
    ))
}

/// One combined request per intervention; the first `rank_k` parsed
/// questions are kept.
fn single_prompt(
    intervention: &Intervention,
    config: &RunConfig,
    backend: &dyn ChatBackend,
    events: &mut EventLog,
) -> Result<SubmissionEntry, StageError> {
    let template = config
        .baseline_prompt
        .as_deref()
        .ok_or_else(|| StageError::Usage("missing baseline prompt".into()))?;
    let prompt = fill(template, &[("intervention", &intervention.text)]);
    let mut questions = None;
    for attempt in 0..2 {
        let mut session = ChatSession::with_system(
            SessionTag::ExtractionGeneration,
            &intervention.id,
            &config.system_prompt,
        );
        events.record(
            Stage::Baseline,
            EventKind::Request,
            json!({ "tag": session.tag(), "turn": attempt, "message_count": session.len() + 1, "user_text": prompt }),
        );
        let reply = send(&mut session, &prompt, backend).map_err(|source| StageError::Backend {
            stage: Stage::Baseline,
            turn: attempt,
            source,
        })?;
        events.record(
            Stage::Baseline,
            EventKind::Reply,
            json!({ "turn": attempt, "text": reply }),
        );
        match parse_cq_list(&reply) {
            Ok(qs) => {
                questions = Some(qs);
                break;
            }
            Err(failure) => events.record(
                Stage::Baseline,
                EventKind::ParseFailure,
                json!({ "attempt": attempt, "reason": failure.reason }),
            ),
        }
    }
    let mut pool = QuestionPool::new();
    match questions {
        Some(qs) => {
            pool.add_turn(&qs, TEMPLATE_FREE);
        }
        None => events.warn(Stage::Baseline, "no parseable question list after retry"),
    }
    Ok(SubmissionEntry::new(
        &intervention.id,
        pool.into_questions()
            .into_iter()
            .take(config.rank_k)
            .map(|q| q.text),
    ))
}

/// Runs every stage for one intervention. Backend failures mark the
/// intervention failed; they never abort the caller.
pub fn process_intervention(
    intervention: &Intervention,
    catalog: &Catalog,
    config: &RunConfig,
    backend: &dyn ChatBackend,
) -> InterventionOutcome {
    let mut events = EventLog::new(&intervention.id);
    let result = match config.prompt_mode {
        PromptMode::SinglePrompt => single_prompt(intervention, config, backend, &mut events),
        _ => staged(intervention, catalog, config, backend, &mut events),
    };
    let (entry, error) = match result {
        Ok(entry) => {
            if entry.cqs.len() < config.rank_k {
                events.warn(
                    Stage::Pipeline,
                    format!(
                        "entry has {} question(s), {} wanted",
                        entry.cqs.len(),
                        config.rank_k
                    ),
                );
            }
            events.record(
                Stage::Pipeline,
                EventKind::Completed,
                json!({ "questions": entry.cqs.len() }),
            );
            (Some(entry), None)
        }
        Err(e) => {
            let message = e.to_string();
            log::error!("{}: {message}", intervention.id);
            events.record(
                Stage::Pipeline,
                EventKind::Failed,
                json!({ "error": message }),
            );
            (None, Some(message))
        }
    };
    InterventionOutcome {
        intervention_id: intervention.id.clone(),
        entry,
        events: events.into_events(),
        error,
    }
}

/// Processes interventions with at most `parallelism` in flight. Outcomes
/// are returned in input order; `on_done` sees each as it finishes.
pub fn process_all<F>(
    interventions: &[Intervention],
    catalog: &Catalog,
    config: &RunConfig,
    backend: &dyn ChatBackend,
    on_done: F,
) -> Vec<InterventionOutcome>
where
    F: Fn(&InterventionOutcome) + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<InterventionOutcome>>> =
        interventions.iter().map(|_| Mutex::new(None)).collect();
    let workers = config.parallelism.clamp(1, interventions.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(intervention) = interventions.get(i) else {
                    break;
                };
                let outcome = process_intervention(intervention, catalog, config, backend);
                on_done(&outcome);
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub succeeded: usize,
    pub failed: usize,
    pub warnings: usize,
    pub wall_time: Duration,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            0
        } else {
            1
        }
    }
}

pub fn run_dataset(
    dataset_path: &Path,
    out_path: &Path,
    log_path: Option<&Path>,
    catalog: &Catalog,
    config: &RunConfig,
    backend: &dyn ChatBackend,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let started = Instant::now();
    let interventions = load_interventions(dataset_path)?;
    let writer = log_path
        .map(|p| {
            RunLogWriter::create(p).map_err(|source| PipelineError::Log {
                path: p.display().to_string(),
                source,
            })
        })
        .transpose()?;
    if let Some(writer) = &writer {
        let mut meta = EventLog::new("");
        meta.record(
            Stage::Pipeline,
            EventKind::RunStarted,
            json!({ "config": config, "backend": backend.name(), "interventions": interventions.len() }),
        );
        writer
            .write_all(meta.events())
            .map_err(|source| PipelineError::Log {
                path: log_path.unwrap().display().to_string(),
                source,
            })?;
    }
    let log_errors = Mutex::new(None);
    let outcomes = process_all(&interventions, catalog, config, backend, |outcome| {
        if let Some(writer) = &writer {
            if let Err(e) = writer.write_all(&outcome.events) {
                log_errors.lock().unwrap().get_or_insert(e);
            }
        }
    });
    if let Some(source) = log_errors.into_inner().unwrap() {
        return Err(PipelineError::Log {
            path: log_path
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            source,
        });
    }
    let entries: Vec<SubmissionEntry> = outcomes.iter().filter_map(|o| o.entry.clone()).collect();
    write_submission(&entries, out_path)?;
    Ok(RunSummary {
        succeeded: entries.len(),
        failed: outcomes.len() - entries.len(),
        warnings: outcomes.iter().map(InterventionOutcome::warnings).sum(),
        wall_time: started.elapsed(),
    })
}

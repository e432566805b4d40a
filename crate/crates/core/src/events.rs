//! Run-log events, one JSON object per line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Generation,
    TopUp,
    Ranking,
    Baseline,
    Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunStarted,
    Request,
    Reply,
    ParseFailure,
    Warning,
    Repair,
    Session,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub intervention_id: String,
    pub stage: Stage,
    pub event: EventKind,
    pub payload: Value,
    pub timestamp: String,
}

/// Events collected while processing one intervention.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    intervention_id: String,
    events: Vec<RunEvent>,
}

impl EventLog {
    pub fn new(intervention_id: impl Into<String>) -> Self {
        Self {
            intervention_id: intervention_id.into(),
            events: Vec::new(),
        }
    }

    pub fn record(&mut self, stage: Stage, event: EventKind, payload: Value) {
        self.events.push(RunEvent {
            intervention_id: self.intervention_id.clone(),
            stage,
            event,
            payload,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        });
    }

    pub fn warn(&mut self, stage: Stage, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{}: {message}", self.intervention_id);
        self.record(
            stage,
            EventKind::Warning,
            serde_json::json!({ "message": message }),
        );
    }

    pub fn events(&self) -> &[RunEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<RunEvent> {
        self.events
    }

    pub fn count(&self, stage: Stage, event: EventKind) -> usize {
        self.events
            .iter()
            .filter(|e| e.stage == stage && e.event == event)
            .count()
    }

    pub fn warnings(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.event == EventKind::Warning)
            .count()
    }
}

/// Shared JSON-lines writer; concurrent callers are serialized.
pub struct RunLogWriter {
    out: Mutex<BufWriter<File>>,
}

impl RunLogWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            out: Mutex::new(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn write_all(&self, events: &[RunEvent]) -> std::io::Result<()> {
        let mut out = self.out.lock().unwrap();
        for event in events {
            serde_json::to_writer(&mut *out, event)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

pub fn read_run_log(path: &Path) -> std::io::Result<Vec<RunEvent>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

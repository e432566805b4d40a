//! Intervention datasets and submission files.
//!
//! Input: `{id: {"intervention": text, "schemes": [names]}}`, order kept.
//! Output: `{id: {"cqs": [{"id": n, "cq": text}]}}`, keys sorted.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("intervention `{id}`: {message}")]
    Schema { id: String, message: String },
    #[error("duplicate intervention id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intervention {
    pub id: String,
    pub text: String,
    pub scheme_names: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct InterventionRecord {
    intervention: String,
    #[serde(default)]
    schemes: Vec<String>,
}

/// JSON object entries in document order, duplicates included.
struct OrderedEntries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object keyed by intervention id")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries = Vec::new();
                while let Some(entry) = map.next_entry::<String, Value>()? {
                    entries.push(entry);
                }
                Ok(OrderedEntries(entries))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn json_error(e: serde_json::Error) -> DatasetError {
    DatasetError::Json {
        line: e.line(),
        message: e.to_string(),
    }
}

pub fn parse_interventions(text: &str) -> Result<Vec<Intervention>, DatasetError> {
    let OrderedEntries(entries) = serde_json::from_str(text).map_err(json_error)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for (id, value) in entries {
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId(id));
        }
        let record: InterventionRecord =
            serde_json::from_value(value).map_err(|e| DatasetError::Schema {
                id: id.clone(),
                message: e.to_string(),
            })?;
        if record.intervention.trim().is_empty() {
            return Err(DatasetError::Schema {
                id,
                message: "empty intervention text".into(),
            });
        }
        out.push(Intervention {
            id,
            text: record.intervention,
            scheme_names: record.schemes,
        });
    }
    Ok(out)
}

pub fn load_interventions(path: &Path) -> Result<Vec<Intervention>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_interventions(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionCq {
    pub id: usize,
    pub cq: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionEntry {
    pub intervention_id: String,
    pub cqs: Vec<SubmissionCq>,
}

impl SubmissionEntry {
    /// Renumbers `texts` from 0 in the given order.
    pub fn new<S: Into<String>>(intervention_id: &str, texts: impl IntoIterator<Item = S>) -> Self {
        Self {
            intervention_id: intervention_id.to_string(),
            cqs: texts
                .into_iter()
                .enumerate()
                .map(|(id, cq)| SubmissionCq { id, cq: cq.into() })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SubmissionRecord {
    cqs: Vec<SubmissionCq>,
}

pub fn render_submission(entries: &[SubmissionEntry]) -> String {
    let map: BTreeMap<&str, SubmissionRecord> = entries
        .iter()
        .map(|e| {
            (
                e.intervention_id.as_str(),
                SubmissionRecord { cqs: e.cqs.clone() },
            )
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&map).expect("submission serializes");
    text.push('\n');
    text
}

pub fn write_submission(entries: &[SubmissionEntry], path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, render_submission(entries)).map_err(|source| DatasetError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Entries in key order.
pub fn read_submission(path: &Path) -> Result<Vec<SubmissionEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let map: BTreeMap<String, SubmissionRecord> =
        serde_json::from_str(&text).map_err(json_error)?;
    Ok(map
        .into_iter()
        .map(|(intervention_id, r)| SubmissionEntry {
            intervention_id,
            cqs: r.cqs,
        })
        .collect())
}

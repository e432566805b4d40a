use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatRequest, SessionTag};

/// One entry of a replay script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptRecord {
    /// Reply keyed by the digest of the full request history.
    Digest { digest: String, reply: String },
    /// Reply served in order to sessions with this tag, optionally only for
    /// one intervention.
    Ordered {
        stage_tag: SessionTag,
        reply: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intervention_id: Option<String>,
    },
}

impl ScriptRecord {
    pub fn ordered(intervention_id: &str, tag: SessionTag, reply: impl Into<String>) -> Self {
        ScriptRecord::Ordered {
            stage_tag: tag,
            reply: reply.into(),
            intervention_id: Some(intervention_id.to_string()),
        }
    }
}

type QueueKey = (Option<String>, SessionTag);

/// Deterministic offline backend.
///
/// Digest records are looked up first; otherwise the next ordered reply for
/// the request's (scope, tag) is served, falling back to records without an
/// intervention id. Ordered queues are per scope, so results do not depend on
/// how interventions are interleaved across threads.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    digests: HashMap<String, String>,
    queues: Mutex<HashMap<QueueKey, VecDeque<String>>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn from_records(records: impl IntoIterator<Item = ScriptRecord>) -> Self {
        let mut digests = HashMap::new();
        let mut queues: HashMap<QueueKey, VecDeque<String>> = HashMap::new();
        for record in records {
            match record {
                ScriptRecord::Digest { digest, reply } => {
                    digests.insert(digest, reply);
                }
                ScriptRecord::Ordered {
                    stage_tag,
                    reply,
                    intervention_id,
                } => queues
                    .entry((intervention_id, stage_tag))
                    .or_default()
                    .push_back(reply),
            }
        }
        Self {
            digests,
            queues: Mutex::new(queues),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_digests(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self::from_records(
            pairs
                .into_iter()
                .map(|(digest, reply)| ScriptRecord::Digest { digest, reply }),
        )
    }

    /// Parses a script given either as a JSON list or as JSON lines.
    pub fn parse(text: &str) -> Result<Vec<ScriptRecord>, serde_json::Error> {
        if text.trim_start().starts_with('[') {
            serde_json::from_str(text)
        } else {
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect()
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|source| BackendError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let records = Self::parse(&text)
            .map_err(|e| BackendError::Config(format!("bad script {}: {e}", path.display())))?;
        Ok(Self::from_records(records))
    }

    /// Requests answered so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Ordered replies not yet consumed.
    pub fn remaining(&self) -> usize {
        self.queues
            .lock()
            .unwrap()
            .values()
            .map(VecDeque::len)
            .sum()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let digest = request.digest();
        if let Some(reply) = self.digests.get(&digest) {
            self.calls.fetch_add(1, Ordering::SeqCst);
            return Ok(reply.clone());
        }
        let mut queues = self.queues.lock().unwrap();
        let scoped = (Some(request.scope.to_string()), request.tag);
        let shared = (None, request.tag);
        let reply = [scoped, shared]
            .iter()
            .find_map(|key| queues.get_mut(key).and_then(VecDeque::pop_front));
        match reply {
            Some(reply) => {
                self.calls.fetch_add(1, Ordering::SeqCst);
                Ok(reply)
            }
            None => Err(BackendError::NoScriptedReply {
                scope: request.scope.to_string(),
                tag: request.tag,
                digest,
            }),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

type ReplyFn<'a> = dyn Fn(&ChatRequest<'_>) -> Result<String, BackendError> + Send + Sync + 'a;

/// Backend computing replies with a closure.
pub struct FnBackend<'a> {
    reply: Box<ReplyFn<'a>>,
}

impl<'a> FnBackend<'a> {
    pub fn new<F>(reply: F) -> Self
    where
        F: Fn(&ChatRequest<'_>) -> Result<String, BackendError> + Send + Sync + 'a,
    {
        Self {
            reply: Box::new(reply),
        }
    }
}

impl ChatBackend for FnBackend<'_> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (self.reply)(request)
    }

    fn name(&self) -> &str {
        "fn"
    }
}

/// Wraps a backend and appends every successful exchange to a replay store
/// as a JSON line `{"digest": ..., "reply": ...}`.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: &Path) -> Result<Self, BackendError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| BackendError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let reply = self.inner.complete(request)?;
        let record = ScriptRecord::Digest {
            digest: request.digest(),
            reply: reply.clone(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut out = self.out.lock().unwrap();
        writeln!(out, "{line}").map_err(|source| BackendError::Io {
            path: "replay store".into(),
            source,
        })?;
        Ok(reply)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::{send, ChatSession, Role};

    #[test]
    fn ordered_replies_are_per_scope_and_tag() {
        let backend = ScriptedBackend::from_records([
            ScriptRecord::ordered("a", SessionTag::ExtractionGeneration, "a1"),
            ScriptRecord::ordered("b", SessionTag::ExtractionGeneration, "b1"),
            ScriptRecord::ordered("a", SessionTag::ExtractionGeneration, "a2"),
            ScriptRecord::ordered("a", SessionTag::Ranking, "ar"),
        ]);
        let mut sa = ChatSession::new(SessionTag::ExtractionGeneration, "a");
        let mut sb = ChatSession::new(SessionTag::ExtractionGeneration, "b");
        let mut ra = ChatSession::new(SessionTag::Ranking, "a");
        assert_eq!(send(&mut sb, "x", &backend).unwrap(), "b1");
        assert_eq!(send(&mut ra, "x", &backend).unwrap(), "ar");
        assert_eq!(send(&mut sa, "x", &backend).unwrap(), "a1");
        assert_eq!(send(&mut sa, "y", &backend).unwrap(), "a2");
        assert!(matches!(
            send(&mut sa, "z", &backend),
            Err(BackendError::NoScriptedReply { .. })
        ));
        assert_eq!(backend.calls(), 4);
        assert_eq!(backend.remaining(), 0);
    }

    #[test]
    fn parses_list_and_json_lines() {
        let list = r#"[{"digest": "d", "reply": "r"}, {"stage_tag": "ranking", "reply": "[0]"}]"#;
        let lines = "{\"digest\": \"d\", \"reply\": \"r\"}\n\n{\"stage_tag\": \"ranking\", \"reply\": \"[0]\"}\n";
        let a = ScriptedBackend::parse(list).unwrap();
        assert_eq!(a, ScriptedBackend::parse(lines).unwrap());
        assert_eq!(
            a[1],
            ScriptRecord::Ordered {
                stage_tag: SessionTag::Ranking,
                reply: "[0]".into(),
                intervention_id: None
            }
        );
    }

    #[test]
    fn recording_round_trips_through_replay() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("replay.jsonl");
        let live = FnBackend::new(|req: &ChatRequest<'_>| {
            Ok(format!("echo {}", req.messages.last().unwrap().content))
        });
        let recorder = RecordingBackend::new(live, &store).unwrap();
        let mut session = ChatSession::with_system(SessionTag::Ranking, "s", "sys");
        send(&mut session, "one", &recorder).unwrap();
        send(&mut session, "two", &recorder).unwrap();

        let replay = ScriptedBackend::load(&store).unwrap();
        let mut again = ChatSession::with_system(SessionTag::Ranking, "s", "sys");
        assert_eq!(send(&mut again, "one", &replay).unwrap(), "echo one");
        assert_eq!(send(&mut again, "two", &replay).unwrap(), "echo two");
        assert_eq!(again.messages()[4].role, Role::Assistant);
        assert_eq!(again, session);
    }
}

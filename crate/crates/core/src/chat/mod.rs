//! Chat sessions and the backends that answer them.
//!
//! A [`ChatSession`] is an ordered, role-tagged history: an optional system
//! message followed by strictly alternating user and assistant turns.
//! [`send`] appends one exchange, delegating the reply to a [`ChatBackend`].

mod remote;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use remote::{BackendConfig, RemoteBackend, RetryPolicy};
pub use scripted::{FnBackend, RecordingBackend, ScriptRecord, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionTag {
    ExtractionGeneration,
    Ranking,
}

impl fmt::Display for SessionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionTag::ExtractionGeneration => "extraction_generation",
            SessionTag::Ranking => "ranking",
        })
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("API returned status {status} after {attempts} attempt(s): {body}")]
    Api {
        status: u16,
        body: String,
        attempts: u32,
    },
    #[error("backend returned an empty reply")]
    EmptyReply,
    #[error("no scripted reply for {scope}/{tag} (digest {digest})")]
    NoScriptedReply {
        scope: String,
        tag: SessionTag,
        digest: String,
    },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One completion request: the full history with the pending user turn last.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub messages: &'a [Message],
    pub tag: SessionTag,
    /// Owner of the session, usually the intervention id.
    pub scope: &'a str,
}

impl ChatRequest<'_> {
    pub fn digest(&self) -> String {
        match self.messages.split_last() {
            Some((last, history)) if last.role == Role::User => {
                digest_messages(history, &last.content)
            }
            _ => digest_messages(self.messages, ""),
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError>;

    fn name(&self) -> &str;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatSession {
    messages: Vec<Message>,
    tag: SessionTag,
    scope: String,
}

impl ChatSession {
    pub fn new(tag: SessionTag, scope: impl Into<String>) -> Self {
        Self {
            messages: Vec::new(),
            tag,
            scope: scope.into(),
        }
    }

    pub fn with_system(tag: SessionTag, scope: impl Into<String>, system: &str) -> Self {
        let mut session = Self::new(tag, scope);
        if !system.is_empty() {
            session.messages.push(Message::new(Role::System, system));
        }
        session
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn tag(&self) -> SessionTag {
        self.tag
    }

    pub fn scope(&self) -> &str {
        &self.scope
    }

    /// Number of completed user/assistant exchanges.
    pub fn turns(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count()
    }

    /// Checks the ordering invariants: optional leading system message, then
    /// user and assistant strictly alternating starting with user.
    pub fn check(&self) -> Result<(), BackendError> {
        let body = match self.messages.first() {
            Some(m) if m.role == Role::System => &self.messages[1..],
            _ => &self.messages[..],
        };
        for (i, m) in body.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if m.role != expected {
                return Err(BackendError::InvalidSession(format!(
                    "message {i} after system prefix is {} but {} was expected",
                    m.role.as_str(),
                    expected.as_str()
                )));
            }
            if m.content.is_empty() {
                return Err(BackendError::InvalidSession(format!(
                    "message {i} has empty content"
                )));
            }
        }
        Ok(())
    }
}

/// Appends `user_text` and the backend's reply to `session`, returning the
/// reply. On error the session is left as it was.
pub fn send<B: ChatBackend + ?Sized>(
    session: &mut ChatSession,
    user_text: &str,
    backend: &B,
) -> Result<String, BackendError> {
    if user_text.is_empty() {
        return Err(BackendError::InvalidSession("empty user message".into()));
    }
    if session
        .messages
        .last()
        .is_some_and(|m| m.role == Role::User)
    {
        return Err(BackendError::InvalidSession(
            "previous user message has no reply".into(),
        ));
    }
    session.messages.push(Message::new(Role::User, user_text));
    let request = ChatRequest {
        messages: &session.messages,
        tag: session.tag,
        scope: &session.scope,
    };
    let reply = match backend.complete(&request) {
        Ok(reply) if reply.trim().is_empty() => Err(BackendError::EmptyReply),
        other => other,
    };
    match reply {
        Ok(reply) => {
            session
                .messages
                .push(Message::new(Role::Assistant, reply.clone()));
            Ok(reply)
        }
        Err(e) => {
            session.messages.pop();
            Err(e)
        }
    }
}

/// Stable digest of a history plus the pending user text.
pub fn digest_history(session: &ChatSession, user_text: &str) -> String {
    digest_messages(&session.messages, user_text)
}

fn digest_messages(history: &[Message], user_text: &str) -> String {
    let mut hasher = Sha256::new();
    // length-prefixed framing keeps message boundaries unambiguous
    for m in history {
        hasher.update([m.role as u8]);
        hasher.update((m.content.len() as u64).to_le_bytes());
        hasher.update(m.content.as_bytes());
    }
    hasher.update([0xff]);
    hasher.update((user_text.len() as u64).to_le_bytes());
    hasher.update(user_text.as_bytes());
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ok_backend() -> FnBackend<'static> {
        FnBackend::new(|_req| Ok("OK".to_string()))
    }

    #[test]
    fn send_on_empty_session() {
        let empty = ChatSession::new(SessionTag::ExtractionGeneration, "x");
        let digest = digest_history(&empty, "hi");
        let backend = ScriptedBackend::from_digests([(digest, "OK".to_string())]);
        let mut session = empty.clone();
        assert_eq!(send(&mut session, "hi", &backend).unwrap(), "OK");
        assert_eq!(session.len(), 2);
    }

    #[test]
    fn send_twice_alternates_roles() {
        let mut session = ChatSession::new(SessionTag::Ranking, "x");
        let backend = ok_backend();
        send(&mut session, "one", &backend).unwrap();
        send(&mut session, "two", &backend).unwrap();
        let roles: Vec<Role> = session.messages().iter().map(|m| m.role).collect();
        assert_eq!(
            roles,
            vec![Role::User, Role::Assistant, Role::User, Role::Assistant]
        );
        session.check().unwrap();
        assert_eq!(session.turns(), 2);
    }

    #[test]
    fn empty_reply_is_an_error_and_session_unchanged() {
        let mut session = ChatSession::with_system(SessionTag::Ranking, "x", "sys");
        let backend = FnBackend::new(|_req| Ok("   ".to_string()));
        assert!(matches!(
            send(&mut session, "hi", &backend),
            Err(BackendError::EmptyReply)
        ));
        assert_eq!(session.len(), 1);
    }

    #[test]
    fn empty_user_text_rejected() {
        let mut session = ChatSession::new(SessionTag::Ranking, "x");
        assert!(send(&mut session, "", &ok_backend()).is_err());
    }

    #[test]
    fn request_digest_matches_history_digest() {
        let mut session = ChatSession::with_system(SessionTag::Ranking, "x", "sys");
        let expected = digest_history(&session, "hello");
        let seen = std::sync::Mutex::new(String::new());
        let backend = FnBackend::new(|req: &ChatRequest<'_>| {
            *seen.lock().unwrap() = req.digest();
            Ok("fine".into())
        });
        send(&mut session, "hello", &backend).unwrap();
        assert_eq!(*seen.lock().unwrap(), expected);
    }

    #[test]
    fn digest_is_deterministic_and_total() {
        let session = ChatSession::new(SessionTag::Ranking, "x");
        assert_eq!(digest_history(&session, "x"), digest_history(&session, "x"));
        assert_eq!(digest_history(&session, "x").len(), 64);
    }

    #[test]
    fn digest_changes_with_role_order() {
        let a = ChatSession {
            messages: vec![
                Message::new(Role::User, "p"),
                Message::new(Role::Assistant, "q"),
            ],
            tag: SessionTag::Ranking,
            scope: String::new(),
        };
        let b = ChatSession {
            messages: vec![
                Message::new(Role::Assistant, "p"),
                Message::new(Role::User, "q"),
            ],
            ..a.clone()
        };
        assert_ne!(digest_history(&a, "z"), digest_history(&b, "z"));
    }

    // 1000 single-character perturbations of a base history must all digest
    // differently from each other and from the base.
    #[test]
    fn digest_perturbation_corpus_has_no_collisions() {
        let base = vec![
            Message::new(Role::System, "You are helpful."),
            Message::new(Role::User, "Extract arguments from the paragraph."),
            Message::new(Role::Assistant, "Premise: E is an expert."),
        ];
        let user_text = "Generate critical questions.";
        let mut seen = HashSet::new();
        seen.insert(digest_messages(&base, user_text));
        let mut produced = 0;
        'outer: for target in 0..4 {
            let source = if target < 3 {
                base[target].content.clone()
            } else {
                user_text.to_string()
            };
            for pos in 0..source.len() {
                for replacement in "#~0123456789".chars() {
                    let mut chars: Vec<char> = source.chars().collect();
                    if chars[pos] == replacement {
                        continue;
                    }
                    chars[pos] = replacement;
                    let changed: String = chars.into_iter().collect();
                    let mut history = base.clone();
                    let text = if target < 3 {
                        history[target].content = changed;
                        user_text.to_string()
                    } else {
                        changed
                    };
                    assert!(seen.insert(digest_messages(&history, &text)));
                    produced += 1;
                    if produced == 1000 {
                        break 'outer;
                    }
                }
            }
        }
        assert_eq!(produced, 1000);
    }

    #[test]
    fn check_rejects_misplaced_system() {
        let session = ChatSession {
            messages: vec![
                Message::new(Role::User, "a"),
                Message::new(Role::System, "b"),
            ],
            tag: SessionTag::Ranking,
            scope: String::new(),
        };
        assert!(session.check().is_err());
    }
}

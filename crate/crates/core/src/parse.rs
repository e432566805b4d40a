//! Parsing of model replies.
//!
//! Models wrap the requested list in code fences, prose, or slightly invalid
//! JSON. Both parsers scan every `[` in the reply, bracket-match a candidate
//! (string-aware), drop trailing commas, and accept the first candidate of
//! the expected shape.

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct ParseFailure {
    pub reason: String,
    pub raw: String,
}

impl ParseFailure {
    fn new(reason: &str, raw: &str) -> Self {
        Self {
            reason: reason.to_string(),
            raw: raw.to_string(),
        }
    }
}

/// Question texts from a `[{"CQ1": "..."}, ...]` reply, in array order.
///
/// Elements may also be bare strings. Key names are ignored.
pub fn parse_cq_list(reply: &str) -> Result<Vec<String>, ParseFailure> {
    for candidate in bracket_candidates(reply) {
        let Ok(Value::Array(items)) = serde_json::from_str(&strip_trailing_commas(candidate))
        else {
            continue;
        };
        let texts: Option<Vec<String>> = items.iter().map(question_text).collect();
        if let Some(texts) = texts {
            return Ok(texts.into_iter().filter(|t| !t.is_empty()).collect());
        }
    }
    Err(ParseFailure::new("no question list found in reply", reply))
}

fn question_text(item: &Value) -> Option<String> {
    match item {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Object(map) if map.len() == 1 => match map.values().next() {
            Some(Value::String(s)) => Some(s.trim().to_string()),
            _ => None,
        },
        _ => None,
    }
}

/// The first bracketed list of integer ids in a ranking reply.
pub fn parse_ranking(reply: &str) -> Result<Vec<i64>, ParseFailure> {
    for candidate in bracket_candidates(reply) {
        let Ok(Value::Array(items)) = serde_json::from_str(&strip_trailing_commas(candidate))
        else {
            continue;
        };
        let ids: Option<Vec<i64>> = items.iter().map(ranking_id).collect();
        if let Some(ids) = ids {
            return Ok(ids);
        }
    }
    Err(ParseFailure::new("no id list found in reply", reply))
}

fn ranking_id(item: &Value) -> Option<i64> {
    match item {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Balanced `[...]` spans in order of their opening bracket.
fn bracket_candidates(text: &str) -> impl Iterator<Item = &str> {
    text.match_indices('[').filter_map(move |(start, _)| {
        matching_close(&text[start..]).map(|end| &text[start..start + end])
    })
}

/// Byte length of the balanced span starting at `text[0]`, if any.
fn matching_close(text: &str) -> Option<usize> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '[' => stack.push(']'),
            '{' => stack.push('}'),
            ']' | '}' => {
                if stack.pop() != Some(c) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Removes commas that directly precede `]` or `}` outside strings.
fn strip_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Canonical rendering of a question list in the requested reply shape.
pub fn render_cq_list(questions: &[String]) -> String {
    let items: Vec<Value> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mut map = serde_json::Map::new();
            map.insert(format!("CQ{}", i + 1), Value::String(q.clone()));
            Value::Object(map)
        })
        .collect();
    serde_json::to_string(&items).expect("strings serialize")
}

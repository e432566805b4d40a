//! Argumentation-scheme catalog.
//!
//! A catalog is a JSON list of scheme records. Variable slots are written
//! inline in premises, conclusions and critical-question templates as single
//! capitalized tokens (`E`, `D`, `C1`), and every slot used must be declared
//! in the record's `variables` list.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The catalog shipped with the crate.
pub const BUILTIN_CATALOG: &str = include_str!("../data/schemes.json");

/// Prefix marking dataset scheme names that have no definition of their own.
pub const ER_PREFIX: &str = "ER";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate scheme name `{0}`")]
    DuplicateName(String),
    #[error("scheme `{scheme}` uses undeclared variable slot `{slot}`")]
    UndeclaredSlot { scheme: String, slot: String },
    #[error("scheme `{0}` has no critical-question templates and is not flagged no_cqs")]
    MissingCqs(String),
    #[error("scheme `{0}` has an empty name or conclusion")]
    Incomplete(String),
    #[error("scheme `{0}` not found")]
    NotFound(String),
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub slot: String,
    pub gloss: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeTemplate {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub variables: Vec<Variable>,
    pub premises: Vec<String>,
    pub conclusion: String,
    pub cq_templates: Vec<String>,
    /// Set for schemes whose source gives no critical questions.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_cqs: bool,
}

impl SchemeTemplate {
    pub fn has_cqs(&self) -> bool {
        !self.no_cqs && !self.cq_templates.is_empty()
    }

    /// Definition block used in extraction prompts.
    pub fn render_description(&self) -> String {
        let mut out = format!("Scheme: {}\n{}\n", self.name, self.description.trim());
        for premise in &self.premises {
            out.push_str("Premise: ");
            out.push_str(premise);
            out.push('\n');
        }
        out.push_str("Conclusion: ");
        out.push_str(&self.conclusion);
        out.push('\n');
        if !self.variables.is_empty() {
            let glosses: Vec<String> = self
                .variables
                .iter()
                .map(|v| format!("{} = {}", v.slot, v.gloss))
                .collect();
            out.push_str("Variables: ");
            out.push_str(&glosses.join(", "));
            out.push('\n');
        }
        out
    }

    /// Numbered critical-question block (`CQ1: ...`), one line per template.
    pub fn render_cq_block(&self) -> String {
        let mut out = format!("Critical questions for {}:\n", self.name);
        for (i, cq) in self.cq_templates.iter().enumerate() {
            out.push_str(&format!("CQ{}: {}\n", i + 1, cq));
        }
        out
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.name.trim().is_empty() || self.conclusion.trim().is_empty() {
            return Err(CatalogError::Incomplete(self.name.clone()));
        }
        if self.cq_templates.is_empty() && !self.no_cqs {
            return Err(CatalogError::MissingCqs(self.name.clone()));
        }
        let declared: HashSet<&str> = self.variables.iter().map(|v| v.slot.as_str()).collect();
        let texts = self
            .premises
            .iter()
            .chain(std::iter::once(&self.conclusion))
            .chain(self.cq_templates.iter());
        for text in texts {
            for slot in slot_tokens(text) {
                if !declared.contains(slot) {
                    return Err(CatalogError::UndeclaredSlot {
                        scheme: self.name.clone(),
                        slot: slot.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn is_slot(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_digit())
}

/// Splits `text` into alternating word / non-word spans.
fn spans(text: &str) -> impl Iterator<Item = (bool, &str)> {
    let mut rest = text;
    std::iter::from_fn(move || {
        let first = rest.chars().next()?;
        let word = first.is_alphanumeric() || first == '_';
        let end = rest
            .char_indices()
            .find(|&(_, c)| (c.is_alphanumeric() || c == '_') != word)
            .map_or(rest.len(), |(i, _)| i);
        let (head, tail) = rest.split_at(end);
        rest = tail;
        Some((word, head))
    })
}

/// Variable-slot tokens appearing in a template, in order.
pub fn slot_tokens(text: &str) -> Vec<&str> {
    spans(text)
        .filter(|&(word, tok)| word && is_slot(tok))
        .map(|(_, tok)| tok)
        .collect()
}

/// Substitutes slot tokens with values from `assignment`. Slots without an
/// assignment are left as written.
pub fn render_template(text: &str, assignment: &HashMap<String, String>) -> String {
    spans(text)
        .map(|(word, tok)| match assignment.get(tok) {
            Some(value) if word && is_slot(tok) => value.as_str(),
            _ => tok,
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    schemes: BTreeMap<String, SchemeTemplate>,
}

impl Catalog {
    pub fn from_json(source: &str) -> Result<Self, CatalogError> {
        let records: Vec<SchemeTemplate> =
            serde_json::from_str(source).map_err(|e| CatalogError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        Self::from_schemes(records)
    }

    pub fn from_schemes(records: Vec<SchemeTemplate>) -> Result<Self, CatalogError> {
        let mut schemes = BTreeMap::new();
        for record in records {
            record.validate()?;
            if schemes.contains_key(&record.name) {
                return Err(CatalogError::DuplicateName(record.name));
            }
            schemes.insert(record.name.clone(), record);
        }
        Ok(Self { schemes })
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("shipped catalog is valid")
    }

    pub fn len(&self) -> usize {
        self.schemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&SchemeTemplate, CatalogError> {
        self.schemes
            .get(name)
            .ok_or_else(|| CatalogError::NotFound(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.schemes.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SchemeTemplate> {
        self.schemes.values()
    }
}

/// All occurrences of one scheme name within an intervention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeGroup {
    pub name: String,
    pub count: usize,
}

impl SchemeGroup {
    pub fn new(name: impl Into<String>, count: usize) -> Self {
        Self {
            name: name.into(),
            count,
        }
    }

    /// `Name` for a single occurrence, `Name (xN)` otherwise.
    pub fn label(&self) -> String {
        if self.count > 1 {
            format!("{} (x{})", self.name, self.count)
        } else {
            self.name.clone()
        }
    }
}

/// Sorts names by code point and collapses repeats into counted groups.
pub fn group_scheme_names<S: AsRef<str>>(names: &[S]) -> Vec<SchemeGroup> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for name in names {
        *counts.entry(name.as_ref()).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(name, count)| SchemeGroup::new(name, count))
        .collect()
}

/// Groups names in order of first appearance, without sorting.
pub fn group_in_order<S: AsRef<str>>(names: &[S]) -> Vec<SchemeGroup> {
    let mut groups: Vec<SchemeGroup> = Vec::new();
    for name in names {
        let name = name.as_ref();
        match groups.iter_mut().find(|g| g.name == name) {
            Some(group) => group.count += 1,
            None => groups.push(SchemeGroup::new(name, 1)),
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErMode {
    /// Substitute the template of the scheme named without the prefix.
    Map,
    /// Give the model no template at all.
    #[default]
    Omit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionOrigin {
    Direct,
    ErMapped,
    ErOmitted,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionKind {
    Templated(SchemeTemplate),
    TemplateFree,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeResolution {
    /// The name as it appeared in the intervention.
    pub requested: String,
    pub kind: ResolutionKind,
    pub origin: ResolutionOrigin,
}

impl SchemeResolution {
    pub fn template(&self) -> Option<&SchemeTemplate> {
        match &self.kind {
            ResolutionKind::Templated(t) => Some(t),
            ResolutionKind::TemplateFree => None,
        }
    }

    /// Template usable for critical-question generation, if any.
    pub fn cq_template(&self) -> Option<&SchemeTemplate> {
        self.template().filter(|t| t.has_cqs())
    }
}

impl fmt::Display for SchemeResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.template() {
            Some(t) => write!(f, "{} -> {} ({:?})", self.requested, t.name, self.origin),
            None => write!(f, "{} -> template-free ({:?})", self.requested, self.origin),
        }
    }
}

pub fn resolve_scheme(name: &str, catalog: &Catalog, er_mode: ErMode) -> SchemeResolution {
    let templated = |t: &SchemeTemplate, origin| SchemeResolution {
        requested: name.to_string(),
        kind: ResolutionKind::Templated(t.clone()),
        origin,
    };
    let free = |origin| SchemeResolution {
        requested: name.to_string(),
        kind: ResolutionKind::TemplateFree,
        origin,
    };
    if let Ok(t) = catalog.get(name) {
        return templated(t, ResolutionOrigin::Direct);
    }
    match name.strip_prefix(ER_PREFIX) {
        Some(_) if er_mode == ErMode::Omit => free(ResolutionOrigin::ErOmitted),
        Some(base) => match catalog.get(base) {
            Ok(t) => templated(t, ResolutionOrigin::ErMapped),
            Err(_) => free(ResolutionOrigin::UnknownName),
        },
        None => free(ResolutionOrigin::UnknownName),
    }
}

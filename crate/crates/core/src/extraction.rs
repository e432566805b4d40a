//! Argument-extraction turns.

use std::collections::HashSet;

use crate::catalog::{
    group_in_order, group_scheme_names, resolve_scheme, Catalog, SchemeGroup, SchemeResolution,
};
use crate::config::RunConfig;
use crate::dialogue::{Dialogue, StageError};
use crate::events::{EventLog, Stage};
use crate::prompts::{fill, EXTRACTION_PROMPT};

/// Distinct scheme names presented together in one sorted extraction turn.
pub const NAMES_PER_TURN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionBatch {
    pub groups: Vec<SchemeGroup>,
    pub resolutions: Vec<SchemeResolution>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionTurn {
    pub group_names: Vec<String>,
    pub prompt_text: String,
    pub reply_text: String,
}

pub fn build_extraction_prompt(
    groups: &[SchemeGroup],
    resolutions: &[SchemeResolution],
) -> Result<String, StageError> {
    if groups.is_empty() {
        return Err(StageError::Usage(
            "extraction prompt needs at least one scheme".into(),
        ));
    }
    if groups.len() != resolutions.len() {
        return Err(StageError::Usage(format!(
            "{} groups but {} resolutions",
            groups.len(),
            resolutions.len()
        )));
    }
    let names: Vec<String> = groups.iter().map(SchemeGroup::label).collect();
    let mut seen = HashSet::new();
    let descriptions: Vec<String> = resolutions
        .iter()
        .filter_map(SchemeResolution::template)
        .filter(|t| seen.insert(t.name.clone()))
        .map(|t| t.render_description())
        .collect();
    Ok(fill(
        EXTRACTION_PROMPT,
        &[
            ("scheme_name", &names.join(", ")),
            ("scheme_description", &descriptions.join("\n")),
        ],
    ))
}

/// Splits an intervention's scheme list into extraction turns.
///
/// Sorted mode groups every occurrence of a name together and puts at most
/// [`NAMES_PER_TURN`] names in a turn. Unsorted mode walks the raw list in
/// disjoint windows (the whole list when no window is set).
pub fn plan_batches<S: AsRef<str>>(
    scheme_names: &[S],
    catalog: &Catalog,
    config: &RunConfig,
) -> Vec<ExtractionBatch> {
    let chunks: Vec<Vec<SchemeGroup>> = if config.sort_schemes {
        group_scheme_names(scheme_names)
            .chunks(NAMES_PER_TURN)
            .map(<[SchemeGroup]>::to_vec)
            .collect()
    } else {
        let window = config.legacy_window.unwrap_or(scheme_names.len()).max(1);
        scheme_names.chunks(window).map(group_in_order).collect()
    };
    chunks
        .into_iter()
        .map(|groups| {
            let resolutions = groups
                .iter()
                .map(|g| resolve_scheme(&g.name, catalog, config.er_mode))
                .collect();
            ExtractionBatch {
                groups,
                resolutions,
            }
        })
        .collect()
}

pub fn run_extraction(
    dialogue: &mut Dialogue<'_>,
    events: &mut EventLog,
    batches: &[ExtractionBatch],
) -> Result<Vec<ExtractionTurn>, StageError> {
    let mut turns = Vec::with_capacity(batches.len());
    for (index, batch) in batches.iter().enumerate() {
        let prompt = build_extraction_prompt(&batch.groups, &batch.resolutions)?;
        let (prompt_text, reply_text) = dialogue.ask(events, Stage::Extraction, index, &prompt)?;
        turns.push(ExtractionTurn {
            group_names: batch.groups.iter().map(|g| g.name.clone()).collect(),
            prompt_text,
            reply_text,
        });
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ErMode;
    use crate::chat::{ChatRequest, FnBackend};
    use crate::dialogue::DialogueMode;

    fn resolve(names: &[&str]) -> (Vec<SchemeGroup>, Vec<SchemeResolution>) {
        let catalog = Catalog::builtin();
        let groups = group_scheme_names(names);
        let res = groups
            .iter()
            .map(|g| resolve_scheme(&g.name, &catalog, ErMode::Omit))
            .collect();
        (groups, res)
    }

    #[test]
    fn templated_prompt_contains_definition() {
        let (groups, res) = resolve(&["ExpertOpinion"]);
        let prompt = build_extraction_prompt(&groups, &res).unwrap();
        assert!(prompt.starts_with("Extract arguments for each of the scheme in ExpertOpinion"));
        assert!(prompt.contains("E is an expert in domain D"));
        assert!(prompt.ends_with(
            "If no argument can be extracted to fit the scheme, extract the main arguments with premise and conclusion."
        ));
    }

    #[test]
    fn template_free_prompt_has_no_definition() {
        let (groups, res) = resolve(&["ERExpertOpinion"]);
        let prompt = build_extraction_prompt(&groups, &res).unwrap();
        assert!(prompt.contains("ERExpertOpinion"));
        assert!(!prompt.contains("Premise:"));
        assert!(prompt.contains("If no argument can be extracted"));
    }

    #[test]
    fn repeated_name_is_annotated() {
        let (groups, res) = resolve(&["ExpertOpinion", "ExpertOpinion"]);
        let prompt = build_extraction_prompt(&groups, &res).unwrap();
        assert!(prompt.contains("ExpertOpinion (x2)"));
        assert_eq!(prompt.matches("Premise: E is an expert").count(), 1);
    }

    #[test]
    fn empty_groups_rejected() {
        assert!(matches!(
            build_extraction_prompt(&[], &[]),
            Err(StageError::Usage(_))
        ));
    }

    #[test]
    fn batches_hold_two_names() {
        let catalog = Catalog::builtin();
        let config = RunConfig::default();
        let batches = plan_batches(&["Sign", "Analogy", "Bias", "Analogy"], &catalog, &config);
        let names: Vec<Vec<String>> = batches
            .iter()
            .map(|b| b.groups.iter().map(SchemeGroup::label).collect())
            .collect();
        assert_eq!(names, vec![vec!["Analogy (x2)", "Bias"], vec!["Sign"]]);
    }

    #[test]
    fn legacy_windows_are_disjoint_and_unsorted() {
        let catalog = Catalog::builtin();
        let mut config = RunConfig {
            sort_schemes: false,
            legacy_window: Some(2),
            ..RunConfig::default()
        };
        let batches = plan_batches(&["A", "B", "A"], &catalog, &config);
        let windows: Vec<Vec<SchemeGroup>> = batches.into_iter().map(|b| b.groups).collect();
        assert_eq!(
            windows,
            vec![
                vec![SchemeGroup::new("A", 1), SchemeGroup::new("B", 1)],
                vec![SchemeGroup::new("A", 1)]
            ]
        );
        config.legacy_window = None;
        assert_eq!(plan_batches(&["A", "B", "A"], &catalog, &config).len(), 1);
    }

    #[test]
    fn one_turn_per_batch_and_intervention_opens() {
        let catalog = Catalog::builtin();
        let config = RunConfig::default();
        let backend = FnBackend::new(|_r: &ChatRequest<'_>| Ok("args".into()));
        let mut dialogue =
            Dialogue::new(&backend, DialogueMode::Conversational, "sys", "i", "TEXT");
        let mut events = EventLog::new("i");
        let batches = plan_batches(&["Sign", "Analogy", "Bias"], &catalog, &config);
        let turns = run_extraction(&mut dialogue, &mut events, &batches).unwrap();
        assert_eq!(turns.len(), 2);
        assert!(turns[0]
            .prompt_text
            .starts_with("Input paragraph:\nTEXT\n\nExtract"));
        assert!(turns[1].prompt_text.starts_with("Extract"));
        assert_eq!(dialogue.session().len(), 5);
    }
}

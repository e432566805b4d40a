//! Prompt templates for each pipeline stage.
//!
//! Placeholders are `{name}` tokens. [`fill`] substitutes them in a single
//! pass, so braces inside substituted values are never re-expanded.

/// Argument-extraction instruction.
pub const EXTRACTION_PROMPT: &str = "Extract arguments for each of the scheme in {scheme_name} from the input paragraph.
These schemes are defined as follows:

{scheme_description}
If no argument can be extracted to fit the scheme, extract the main arguments with premise and conclusion.";

/// Critical-question generation instruction, one turn per scheme.
pub const CQ_GENERATION_PROMPT: &str = "{cq_template}

With the help of the information above, generate a list of critical questions to ask regarding the extracted arguments.
You may rephrase the critical question to make it more fluent.
Return only a list questions as defined below:
[{\"CQ1\": \"the content of the critical question\"}, ...]";

/// Tuned ranking instruction.
pub const RANKING_PROMPT: &str = "{intervention}

A helpful critical question can potentially challenge one of the arguments in the text.
Rank and select top three most helpful critical questions.
Return ONLY the question id in a Python list:
```python
[id_1, ...]";

/// Ranking instruction used by profiles without the tuned ranking prompt.
pub const PLAIN_RANKING_PROMPT: &str = "{intervention}

Rank the critical questions above and select the top three.
Return ONLY the question id in a Python list:
```python
[id_1, ...]";

/// Extra generation turn issued when too few questions exist for ranking.
pub const TOP_UP_PROMPT: &str = "{intervention}

A helpful critical question can potentially challenge one of the arguments in the text.
Provide me 3 more critical questions that should be asked given the arguments from the text above.
Return only the questions as following format:
[{\"CQ1\": \"the content of the critical question\"}...]";

/// Replaces `{cq_template}` when a scheme has no critical-question template.
pub const NO_CQ_TEMPLATE: &str =
    "No predefined critical question template is available for this scheme.";

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are a helpful assistant specialized in argument analysis.";

/// Heading that introduces the intervention in the opening user turn.
pub const INTERVENTION_HEADING: &str = "Input paragraph:";

/// Heading for prior-stage output inlined into direct-mode requests.
pub const EXTRACTED_HEADING: &str = "Extracted arguments:";

/// Heading for the candidate list shown to the ranker.
pub const CANDIDATES_HEADING: &str = "Critical questions:";

/// Substitutes `{key}` placeholders named in `values`; any other brace text
/// is kept verbatim.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let key = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (*v, close))
        });
        match hit {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Opening block placed before the first prompt of a conversation.
pub fn intervention_block(text: &str) -> String {
    format!("{INTERVENTION_HEADING}\n{text}\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_substitutes_known_keys_once() {
        let out = fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "2")]);
        assert_eq!(out, "a {y} b 2 {z}");
    }

    #[test]
    fn literal_json_braces_survive() {
        let out = fill(CQ_GENERATION_PROMPT, &[("cq_template", "T")]);
        assert!(out.starts_with("T\n\n"));
        assert!(out.ends_with("[{\"CQ1\": \"the content of the critical question\"}, ...]"));
    }

    #[test]
    fn unclosed_brace_is_kept() {
        assert_eq!(fill("x { y", &[("y", "z")]), "x { y");
    }
}

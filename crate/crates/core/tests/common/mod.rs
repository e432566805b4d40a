#![allow(dead_code)]

use std::path::PathBuf;

use cqgen::chat::{BackendError, ChatRequest, FnBackend, Role};
use cqgen::parse::render_cq_list;
use cqgen::SessionTag;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn is_generation(text: &str) -> bool {
    text.contains("generate a list of critical questions")
}

fn reply_for(request: &ChatRequest<'_>) -> String {
    let (last, history) = request.messages.split_last().expect("non-empty request");
    let scope = request.scope;
    if request.tag == SessionTag::Ranking {
        return "```python\n[2, 0, 1]\n```".to_string();
    }
    if last
        .content
        .contains("Provide me 3 more critical questions")
    {
        return render_cq_list(&[
            format!("What evidence supports the main claim in {scope}?"),
            format!("Are there exceptions to the rule assumed in {scope}?"),
        ]);
    }
    if is_generation(&last.content) {
        let earlier = history
            .iter()
            .filter(|m| m.role == Role::User && is_generation(&m.content))
            .count();
        return if earlier == 0 {
            render_cq_list(&[format!("Is the premise of {scope} acceptable?")])
        } else {
            "[]".to_string()
        };
    }
    let turn = history.iter().filter(|m| m.role == Role::Assistant).count();
    format!("Premise: arguments found in {scope}.\nConclusion: extraction turn {turn}.")
}

/// Replies by inspecting the prompt: the first generation turn of a session
/// yields one question, later ones none, and the top-up adds two.
pub fn responsive_backend() -> FnBackend<'static> {
    FnBackend::new(
        |request: &ChatRequest<'_>| -> Result<String, BackendError> { Ok(reply_for(request)) },
    )
}

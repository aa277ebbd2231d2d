//! Prompt construction and opinion elicitation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{OpinionRecord, Perspective, Timeline, Topic};
use crate::oracle::{Oracle, OracleError, ScoreRequest};

/// Pertinence above this value flags a perspective as off-topic.
pub const OFF_TOPIC_PERTINENCE: f64 = 20.0;

const AGREE: &str = "I more or less agree with what my peers are saying here.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Elicitation,
    Generation,
}

fn header(title: &str) -> String {
    alloc::format!("Let's discuss {title}!\n\n")
}

fn suffix(title: &str, kind: PromptKind) -> String {
    match kind {
        PromptKind::Elicitation => alloc::format!("{AGREE} And therefore, all in all,"),
        PromptKind::Generation => {
            alloc::format!("{AGREE} Regarding the {title}, I'd just add the following thought:")
        }
    }
}

/// `Let's discuss {title}!`, then each post, blank-line separated, then the
/// kind-specific closing line.
pub fn build_prompt(posts: &[&str], topic: &Topic, kind: PromptKind) -> Result<String, OracleError> {
    if posts.is_empty() {
        return Err(OracleError::InvalidInput("cannot prompt with an empty perspective".into()));
    }
    let mut prompt = header(&topic.title);
    for post in posts {
        prompt.push_str(post);
        prompt.push_str("\n\n");
    }
    prompt.push_str(&suffix(&topic.title, kind));
    Ok(prompt)
}

/// Recover the post texts from a prompt produced by [`build_prompt`].
pub fn split_prompt<'a>(prompt: &'a str, title: &str) -> Option<Vec<&'a str>> {
    let rest = prompt.strip_prefix(header(title).as_str())?;
    let (body, tail) = rest.rsplit_once("\n\n")?;
    if tail != suffix(title, PromptKind::Elicitation) && tail != suffix(title, PromptKind::Generation) {
        return None;
    }
    Some(body.split("\n\n").collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Opinion of a perspective given as ordered post texts. All pro and con
/// claims go out in one scoring request.
pub fn elicit<O: Oracle + ?Sized>(
    posts: &[&str],
    topic: &Topic,
    oracle: &O,
) -> Result<OpinionRecord, OracleError> {
    let prompt = build_prompt(posts, topic, PromptKind::Elicitation)?;
    let n_pro = topic.pro_claims.len();
    let claims: Vec<String> = topic.pro_claims.iter().chain(&topic.con_claims).cloned().collect();
    let request = ScoreRequest::new(prompt, claims)?;
    let scores = oracle.score(&request)?;
    if scores.len() != request.continuations.len() {
        return Err(OracleError::Malformed(alloc::format!(
            "expected {} perplexities, got {}",
            request.continuations.len(),
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(OracleError::Malformed(alloc::format!("non-positive perplexity {bad}")));
    }
    Ok(OpinionRecord::from_perplexities(mean(&scores[..n_pro]), mean(&scores[n_pro..])))
}

pub fn elicit_perspective<O: Oracle + ?Sized>(
    perspective: &Perspective,
    timeline: &Timeline,
    topic: &Topic,
    oracle: &O,
) -> Result<OpinionRecord, OracleError> {
    let texts = perspective
        .texts(timeline)
        .map_err(|e| OracleError::InvalidInput(alloc::format!("{e}")))?;
    elicit(&texts, topic, oracle)
}

/// Diagnostic flag; never feeds back into the dynamics.
pub fn off_topic(record: &OpinionRecord) -> bool {
    record.pertinence > OFF_TOPIC_PERTINENCE
}

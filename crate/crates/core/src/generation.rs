//! Contribution decisions and post generation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::config::{AgentType, DecodingParams};
use crate::elicitation::{build_prompt, PromptKind};
use crate::model::{Author, NewPost, Step, Topic};
use crate::oracle::mock::stance_in_text;
use crate::oracle::{GenerateRequest, Oracle, OracleError};
use crate::MAX_POST_WORDS;

/// Coin flip with the contribution probability; listening agents never
/// contribute.
pub fn should_contribute<R: Rng + ?Sized>(agent_type: AgentType, probability: f64, rng: &mut R) -> bool {
    if !agent_type.is_generating() || probability <= 0.0 {
        return false;
    }
    rng.random::<f64>() < probability
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Clean up raw generated text: drop an echoed prompt, keep the first
/// `max_words` words, cut after the last sentence terminator and collapse
/// whitespace.
pub fn postprocess(raw: &str, prompt: Option<&str>, max_words: usize) -> Result<String, OracleError> {
    let mut text = raw;
    if let Some(p) = prompt {
        if let Some(rest) = text.strip_prefix(p) {
            text = rest;
        } else if let Some(rest) = text.trim_start().strip_prefix(p.trim()) {
            text = rest;
        }
    }
    let words: Vec<&str> = text.split_whitespace().take(max_words.min(MAX_POST_WORDS)).collect();
    let joined = words.join(" ");
    let cut = match joined.rfind(is_terminal) {
        Some(pos) => &joined[..=pos],
        None => "",
    };
    let out = cut.trim();
    if out.is_empty() {
        return Err(OracleError::EmptyGeneration);
    }
    Ok(String::from(out))
}

/// Prompt the oracle with the agent's perspective and turn the reply into a
/// post submitted at `step`.
pub fn compose_post<O: Oracle + ?Sized>(
    agent: usize,
    perspective_texts: &[&str],
    topic: &Topic,
    params: &DecodingParams,
    oracle: &O,
    rng: &mut dyn RngCore,
    step: Step,
) -> Result<NewPost, OracleError> {
    let prompt = build_prompt(perspective_texts, topic, PromptKind::Generation)?;
    let request = GenerateRequest { prompt, params: *params };
    let raw = oracle.generate(&request, rng)?;
    let text = postprocess(&raw, Some(&request.prompt), params.max_words)?;
    Ok(NewPost {
        mock_stance: stance_in_text(&text),
        text,
        author: Author::Agent(agent),
        submitted_at: step,
        stance: None,
        conclusion_explicated: false,
    })
}

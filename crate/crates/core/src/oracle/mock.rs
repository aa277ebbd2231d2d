//! Deterministic stance-based oracle.
//!
//! Each post carries a hidden stance in [-1, 1]. The mock reads the posts
//! back out of a prompt, forms their recency-weighted mean (the lean `L`,
//! newest post weighted most) and maps it to claim perplexities through a
//! logistic curve. Generation emits a templated post whose stance is the lean
//! plus noise sized by the decoding parameters.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{GenerateRequest, Oracle, OracleError, ScoreRequest};
use crate::config::DecodingParams;
use crate::corpus::Corpus;
use crate::elicitation::split_prompt;
use crate::model::{Stance, Topic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockOracleParams {
    pub recency_decay: f64,
    pub stance_gain: f64,
    pub ppl_floor: f64,
    pub ppl_span: f64,
    /// Overrides the noise scale derived from temperature and top_p.
    pub creative_noise_scale: Option<f64>,
}

impl Default for MockOracleParams {
    fn default() -> Self {
        MockOracleParams {
            recency_decay: 0.8,
            stance_gain: 2.0,
            ppl_floor: 2.0,
            ppl_span: 10.0,
            creative_noise_scale: None,
        }
    }
}

/// Recency-weighted mean of stances ordered oldest to newest:
/// `sum_j g^(n-1-j) s_j / sum_j g^(n-1-j)`.
pub fn mock_lean(stances: &[f64], recency_decay: f64) -> Result<f64, OracleError> {
    if stances.is_empty() {
        return Err(OracleError::InvalidInput("cannot compute the lean of no stances".into()));
    }
    let mut weight = 1.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for &s in stances.iter().rev() {
        num += weight * s;
        den += weight;
        weight *= recency_decay;
    }
    Ok(num / den)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Perplexity of a claim on `side` given lean `lean`.
pub fn mock_perplexity(lean: f64, side: Stance, params: &MockOracleParams) -> f64 {
    let s = logistic(params.stance_gain * lean);
    match side {
        Stance::Pro => params.ppl_floor + params.ppl_span * (1.0 - s),
        Stance::Con => params.ppl_floor + params.ppl_span * s,
    }
}

/// Noise scale for generated stances: `(temperature - 1) + (top_p - 0.5)`,
/// at least 0.01.
pub fn noise_scale(params: &DecodingParams) -> f64 {
    let raw = (params.temperature - 1.0) + (params.top_p - 0.5);
    if raw < 0.01 {
        0.01
    } else {
        raw
    }
}

const TEMPLATE_PREFIX: &str = "Mock post ";
const STANCE_MARKER: &str = "my stance is ";

/// Text of a generated mock post.
pub fn render_post(serial: u32, stance: f64) -> String {
    format!("{TEMPLATE_PREFIX}{serial:08x}: {STANCE_MARKER}{stance:+.6} on this.")
}

/// Stance embedded in a generated mock post, if `text` is one.
pub fn stance_in_text(text: &str) -> Option<f64> {
    let rest = text.strip_prefix(TEMPLATE_PREFIX)?;
    let (_, after) = rest.split_once(STANCE_MARKER)?;
    let value = after.split_whitespace().next()?;
    value.parse().ok()
}

/// Draw a generated post for perspective stances `stances`.
///
/// The noise is a symmetric two-point draw `+-scale`: zero mean, variance
/// `scale^2`, and never clamped when the lean is 0 and `scale <= 1`.
pub fn mock_generate(
    stances: &[f64],
    decoding: &DecodingParams,
    params: &MockOracleParams,
    rng: &mut dyn RngCore,
) -> Result<(String, f64), OracleError> {
    let lean = mock_lean(stances, params.recency_decay)?;
    let scale = params.creative_noise_scale.unwrap_or_else(|| noise_scale(decoding));
    let noise = if rng.random::<bool>() { scale } else { -scale };
    let raw = (lean + noise).clamp(-1.0, 1.0);
    let serial: u32 = rng.random();
    let text = render_post(serial, raw);
    // the stored stance is exactly what a reader of the text recovers
    let stance = stance_in_text(&text).unwrap_or(raw);
    Ok((text, stance))
}

/// Stance-based oracle for a single topic.
#[derive(Debug, Clone)]
pub struct MockOracle {
    topic: Topic,
    stances: BTreeMap<String, f64>,
    params: MockOracleParams,
}

impl MockOracle {
    pub fn new(topic: Topic, params: MockOracleParams) -> Self {
        MockOracle { topic, stances: BTreeMap::new(), params }
    }

    /// Oracle knowing the hidden stance of every corpus entry.
    pub fn from_corpus(topic: Topic, corpus: &Corpus, params: MockOracleParams) -> Result<Self, OracleError> {
        let mut oracle = MockOracle::new(topic, params);
        for e in corpus.entries() {
            oracle.insert(&e.text, e.effective_mock_stance())?;
        }
        Ok(oracle)
    }

    /// Register the hidden stance of a corpus text.
    pub fn with_post(mut self, text: &str, stance: f64) -> Result<Self, OracleError> {
        self.insert(text, stance)?;
        Ok(self)
    }

    pub fn insert(&mut self, text: &str, stance: f64) -> Result<(), OracleError> {
        if !(-1.0..=1.0).contains(&stance) {
            return Err(OracleError::InvalidInput(format!("stance {stance} outside [-1, 1]")));
        }
        match self.stances.get(text) {
            Some(&existing) if existing != stance => Err(OracleError::InvalidInput(format!(
                "text {text:?} registered with conflicting stances"
            ))),
            _ => {
                self.stances.insert(text.to_string(), stance);
                Ok(())
            }
        }
    }

    pub fn params(&self) -> &MockOracleParams {
        &self.params
    }

    pub fn topic(&self) -> &Topic {
        &self.topic
    }

    pub fn stance_of(&self, text: &str) -> Result<f64, OracleError> {
        stance_in_text(text)
            .or_else(|| self.stances.get(text).copied())
            .ok_or_else(|| OracleError::InvalidInput(format!("mock oracle has no stance for {text:?}")))
    }

    fn prompt_stances(&self, prompt: &str) -> Result<Vec<f64>, OracleError> {
        let posts = split_prompt(prompt, &self.topic.title)
            .ok_or_else(|| OracleError::InvalidInput("prompt does not follow the template".into()))?;
        posts.into_iter().map(|p| self.stance_of(p)).collect()
    }

    fn side_of(&self, claim: &str) -> Result<Stance, OracleError> {
        if self.topic.pro_claims.iter().any(|c| c == claim) {
            Ok(Stance::Pro)
        } else if self.topic.con_claims.iter().any(|c| c == claim) {
            Ok(Stance::Con)
        } else {
            Err(OracleError::InvalidInput(format!("{claim:?} is not a topic claim")))
        }
    }
}

impl Oracle for MockOracle {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        if request.continuations.is_empty() {
            return Err(OracleError::InvalidInput("no continuations to score".into()));
        }
        let lean = mock_lean(&self.prompt_stances(&request.context)?, self.params.recency_decay)?;
        request
            .continuations
            .iter()
            .map(|c| Ok(mock_perplexity(lean, self.side_of(c)?, &self.params)))
            .collect()
    }

    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError> {
        let stances = self.prompt_stances(&request.prompt)?;
        mock_generate(&stances, &request.params, &self.params, rng).map(|(text, _)| text)
    }
}

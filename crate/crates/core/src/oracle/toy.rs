//! Token-level table language models.
//!
//! Small, fully specified next-token models used to check the perplexity law
//! exactly and to drive the engine without a neural backend.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::{GenerateRequest, Oracle, OracleError, ScoreRequest};
use crate::rng::splitmix64;

/// A causal model over a finite vocabulary.
pub trait NextTokenModel {
    fn vocab_size(&self) -> usize;

    /// Distribution of the next token given all previous tokens. Entries are
    /// positive and sum to one.
    fn next_token_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

/// `(prod_i 1 / p_i)^(1 / l)` over the continuation tokens, evaluated in log
/// space.
pub fn conditional_perplexity<M: NextTokenModel + ?Sized>(
    model: &M,
    context: &[usize],
    continuation: &[usize],
) -> Result<f64, OracleError> {
    if continuation.is_empty() {
        return Err(OracleError::InvalidInput("continuation has no tokens".into()));
    }
    let mut prefix: Vec<usize> = Vec::with_capacity(context.len() + continuation.len());
    prefix.extend_from_slice(context);
    let mut log_sum = 0.0;
    for &tok in continuation {
        let probs = model.next_token_probs(&prefix);
        let p = *probs
            .get(tok)
            .ok_or_else(|| OracleError::InvalidInput("token outside vocabulary".into()))?;
        log_sum += libm::log(p);
        prefix.push(tok);
    }
    Ok(libm::exp(-log_sum / continuation.len() as f64))
}

/// Uniform next-token distribution; every continuation has perplexity `V`.
#[derive(Debug, Clone, Copy)]
pub struct UniformLm {
    pub vocab: usize,
}

impl NextTokenModel for UniformLm {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_probs(&self, _prefix: &[usize]) -> Vec<f64> {
        vec![1.0 / self.vocab as f64; self.vocab]
    }
}

/// Second-order table model: the next-token distribution depends on the last
/// two tokens, with a begin marker for shorter prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct TableLm {
    vocab: usize,
    rows: Vec<Vec<f64>>,
}

impl TableLm {
    /// `rows[(a * (V + 1)) + b]` is the distribution after tokens `a, b`,
    /// where index `V` stands for "no token".
    pub fn new(vocab: usize, rows: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if rows.len() != (vocab + 1) * (vocab + 1) {
            return Err(OracleError::InvalidInput("wrong number of table rows".into()));
        }
        for row in &rows {
            let sum: f64 = row.iter().sum();
            if row.len() != vocab || row.iter().any(|&p| p.is_nan() || p <= 0.0) || libm::fabs(sum - 1.0) > 1e-12 {
                return Err(OracleError::InvalidInput("table row is not a distribution".into()));
            }
        }
        Ok(TableLm { vocab, rows })
    }

    /// Deterministic table with all probabilities bounded away from zero.
    pub fn pseudo_random(vocab: usize, seed: u64) -> Self {
        let mut state = seed;
        let rows = (0..(vocab + 1) * (vocab + 1))
            .map(|_| {
                let raw: Vec<f64> = (0..vocab)
                    .map(|_| {
                        state = splitmix64(state);
                        0.05 + (state >> 11) as f64 / (1u64 << 53) as f64
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        TableLm { vocab, rows }
    }

    fn row_index(&self, prefix: &[usize]) -> usize {
        let n = prefix.len();
        let a = if n >= 2 { prefix[n - 2] } else { self.vocab };
        let b = if n >= 1 { prefix[n - 1] } else { self.vocab };
        a * (self.vocab + 1) + b
    }
}

impl NextTokenModel for TableLm {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self.rows[self.row_index(prefix)].clone()
    }
}

/// Maps whitespace-separated symbols to token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTokenizer {
    symbols: Vec<String>,
}

impl SymbolTokenizer {
    pub fn new<S: ToString>(symbols: &[S]) -> Self {
        SymbolTokenizer { symbols: symbols.iter().map(ToString::to_string).collect() }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>, OracleError> {
        text.split_whitespace()
            .map(|w| {
                self.symbols
                    .iter()
                    .position(|s| s == w)
                    .ok_or_else(|| OracleError::InvalidInput(alloc::format!("unknown symbol {w:?}")))
            })
            .collect()
    }

    pub fn decode(&self, tokens: &[usize]) -> String {
        let words: Vec<&str> = tokens.iter().map(|&t| self.symbols[t].as_str()).collect();
        words.join(" ")
    }
}

/// Nucleus truncation: tokens sorted by probability, keeping the longest
/// prefix whose cumulative mass stays below `top_p` (at least one token;
/// `top_p >= 1` keeps everything). Returns `(token, prob)` pairs.
pub fn nucleus(probs: &[f64], top_p: f64) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if top_p >= 1.0 {
        return ranked;
    }
    let mut cumulative = 0.0;
    let mut keep = 0;
    for &(_, p) in &ranked {
        if cumulative + p < top_p {
            cumulative += p;
            keep += 1;
        } else {
            break;
        }
    }
    ranked.truncate(keep.max(1));
    ranked
}

/// Temperature rescaling `p^(1/T)`, renormalized.
pub fn apply_temperature(probs: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = probs.iter().map(|&p| libm::pow(p, 1.0 / temperature)).collect();
    let total: f64 = scaled.iter().sum();
    scaled.into_iter().map(|p| p / total).collect()
}

/// Oracle over a token model and a symbol vocabulary.
#[derive(Debug, Clone)]
pub struct TokenOracle<M> {
    pub model: M,
    pub tokenizer: SymbolTokenizer,
}

impl<M: NextTokenModel> TokenOracle<M> {
    pub fn new(model: M, tokenizer: SymbolTokenizer) -> Result<Self, OracleError> {
        if model.vocab_size() != tokenizer.len() {
            return Err(OracleError::InvalidInput("tokenizer and model vocabularies differ".into()));
        }
        Ok(TokenOracle { model, tokenizer })
    }
}

impl<M: NextTokenModel> Oracle for TokenOracle<M> {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        if request.continuations.is_empty() {
            return Err(OracleError::InvalidInput("no continuations to score".into()));
        }
        let context = self.tokenizer.encode(&request.context)?;
        request
            .continuations
            .iter()
            .map(|c| {
                let tokens = self.tokenizer.encode(c)?;
                conditional_perplexity(&self.model, &context, &tokens)
            })
            .collect()
    }

    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError> {
        let mut prefix = self.tokenizer.encode(&request.prompt)?;
        let start = prefix.len();
        let budget = (request.params.max_new_tokens as usize).min(request.params.max_words);
        for _ in 0..budget {
            let probs = self.model.next_token_probs(&prefix);
            let tok = if request.params.sampling {
                let tempered = apply_temperature(&probs, request.params.temperature);
                let eligible = nucleus(&tempered, request.params.top_p);
                let total: f64 = eligible.iter().map(|e| e.1).sum();
                let mut u = rng.random::<f64>() * total;
                let mut chosen = eligible[eligible.len() - 1].0;
                for &(t, p) in &eligible {
                    if u < p {
                        chosen = t;
                        break;
                    }
                    u -= p;
                }
                chosen
            } else {
                nucleus(&probs, 1.0)[0].0
            };
            prefix.push(tok);
        }
        let text = self.tokenizer.decode(&prefix[start..]);
        if text.is_empty() {
            return Err(OracleError::EmptyGeneration);
        }
        Ok(text)
    }
}

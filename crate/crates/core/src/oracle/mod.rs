//! Scoring and generation contract shared by all language-model backends.
//!
//! A backend scores continuations by conditional perplexity,
//! `PPL(w | v) = (prod_i 1 / p_i)^(1 / l)` over the `l` tokens of `w`, and
//! generates text under decoding parameters. Two backends live here: a
//! token-level table model for exact checks and the stance-based mock used
//! for desk-scale simulation. The HTTP client lives in the `agora` crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use rand::RngCore;

use crate::config::DecodingParams;

pub mod mock;
pub mod toy;

pub use mock::{MockOracle, MockOracleParams};
pub use toy::{NextTokenModel, SymbolTokenizer, TableLm, TokenOracle, UniformLm};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("request timed out")]
    Timeout,
    #[error("backend returned status {code}: {message}")]
    Status { code: u16, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty generation")]
    EmptyGeneration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest {
    pub context: String,
    pub continuations: Vec<String>,
}

impl ScoreRequest {
    pub fn new(context: impl Into<String>, continuations: Vec<String>) -> Result<Self, OracleError> {
        if continuations.is_empty() {
            return Err(OracleError::InvalidInput("no continuations to score".into()));
        }
        Ok(ScoreRequest { context: context.into(), continuations })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateRequest {
    pub prompt: String,
    pub params: DecodingParams,
}

pub trait Oracle {
    /// Conditional perplexity of each continuation given the context, in
    /// request order.
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError>;

    /// Raw continuation of the prompt. Post-processing is the caller's job.
    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError>;
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        (**self).score(request)
    }

    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError> {
        (**self).generate(request, rng)
    }
}

impl<T: Oracle + ?Sized> Oracle for alloc::sync::Arc<T> {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        (**self).score(request)
    }

    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError> {
        (**self).generate(request, rng)
    }
}

/// Wraps an oracle and counts calls.
#[derive(Debug, Default)]
pub struct CountingOracle<O> {
    inner: O,
    score_calls: AtomicUsize,
    scored_continuations: AtomicUsize,
    generate_calls: AtomicUsize,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            score_calls: AtomicUsize::new(0),
            scored_continuations: AtomicUsize::new(0),
            generate_calls: AtomicUsize::new(0),
        }
    }

    pub fn score_calls(&self) -> usize {
        self.score_calls.load(Ordering::Relaxed)
    }

    pub fn scored_continuations(&self) -> usize {
        self.scored_continuations.load(Ordering::Relaxed)
    }

    pub fn generate_calls(&self) -> usize {
        self.generate_calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.score_calls.store(0, Ordering::Relaxed);
        self.scored_continuations.store(0, Ordering::Relaxed);
        self.generate_calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        self.score_calls.fetch_add(1, Ordering::Relaxed);
        self.scored_continuations.fetch_add(request.continuations.len(), Ordering::Relaxed);
        self.inner.score(request)
    }

    fn generate(
        &self,
        request: &GenerateRequest,
        rng: &mut dyn RngCore,
    ) -> Result<String, OracleError> {
        self.generate_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.generate(request, rng)
    }
}

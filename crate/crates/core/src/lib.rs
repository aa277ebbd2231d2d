//! Simulation core for natural-language argumentative opinion dynamics.
//!
//! Agents retain a bounded, ordered perspective of short posts. Their opinion
//! is elicited from a scoring oracle as the ratio of conditional perplexities
//! of the topic's pro and con claims given a prompt built from that
//! perspective. Each step agents pick peers, contract and expand their
//! perspectives, optionally author new posts, and are re-elicited.
//!
//! This crate is `no_std` (with `alloc`) and contains no IO. File formats,
//! the HTTP oracle client, ensembles and the command line live in the `agora`
//! crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod elicitation;
pub mod engine;
pub mod error;
pub mod generation;
pub mod model;
pub mod oracle;
pub mod peers;
pub mod rng;
pub mod update;

pub use config::{
    AgentType, DecodingParams, DecodingProfile, ExpansionRule, PeerRule, Scenario, SeedingMode,
    SimulationConfig, UpdatingRule,
};
pub use error::{ConfigError, EngineError, ModelError};
pub use model::{
    AgentState, AgentStepRecord, Author, ConversationTrace, OpinionRecord, Perspective,
    PerspectiveEntry, Post, PostId, Stance, Step, StepRecord, Timeline, Topic,
};
pub use oracle::{GenerateRequest, Oracle, OracleError, ScoreRequest};

/// Maximum number of whitespace-delimited words in a post.
pub const MAX_POST_WORDS: usize = 70;

/// Number of maximal whitespace-separated tokens in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

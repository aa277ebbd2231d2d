//! Shared domain types: topics, posts, the append-only timeline, perspectives
//! and opinion records.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::error::{ConfigError, ModelError};
use crate::{word_count, MAX_POST_WORDS};

/// Simulation step index, starting at 0.
pub type Step = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PostId(pub u32);

impl fmt::Display for PostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Pro,
    Con,
}

impl Stance {
    pub fn opposite(self) -> Stance {
        match self {
            Stance::Pro => Stance::Con,
            Stance::Con => Stance::Pro,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Pro => "pro",
            Stance::Con => "con",
        }
    }

    /// The hidden stance value used by the mock oracle when a corpus entry
    /// does not carry one.
    pub fn default_mock_stance(self) -> f64 {
        match self {
            Stance::Pro => 1.0,
            Stance::Con => -1.0,
        }
    }
}

/// The opposing claim sets a conversation revolves around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub title: String,
    pub pro_claims: Vec<String>,
    pub con_claims: Vec<String>,
    /// Concluding sentences appended to pro corpus entries during
    /// explication. Derived from `pro_claims` when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pro_conclusions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub con_conclusions: Vec<String>,
}

impl Topic {
    pub fn new(
        title: impl Into<String>,
        pro_claims: Vec<String>,
        con_claims: Vec<String>,
    ) -> Result<Topic, ConfigError> {
        let topic = Topic {
            title: title.into(),
            pro_claims,
            con_claims,
            pro_conclusions: Vec::new(),
            con_conclusions: Vec::new(),
        };
        topic.validate()?;
        Ok(topic)
    }

    /// The drug legalization debate used throughout the experiments.
    pub fn drug_legalization() -> Topic {
        Topic {
            title: "legalization of drugs".into(),
            pro_claims: alloc::vec!["All drugs should be legal.".into(), "Decriminalize drugs!".into()],
            con_claims: alloc::vec![
                "No drugs should be legal.".into(),
                "Drugs should be illegal.".into()
            ],
            pro_conclusions: alloc::vec!["So, legalization of drugs is a pretty good idea.".into()],
            con_conclusions: alloc::vec!["So, legalization of drugs is a pretty bad idea.".into()],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.title.trim().is_empty() {
            return Err(ConfigError::new("title", "must not be empty"));
        }
        if self.pro_claims.is_empty() {
            return Err(ConfigError::new("pro_claims", "must not be empty"));
        }
        if self.con_claims.is_empty() {
            return Err(ConfigError::new("con_claims", "must not be empty"));
        }
        let pro: BTreeSet<&str> = self.pro_claims.iter().map(String::as_str).collect();
        if let Some(shared) = self.con_claims.iter().find(|c| pro.contains(c.as_str())) {
            return Err(ConfigError::new(
                "con_claims",
                format!("claim {shared:?} is listed on both sides"),
            ));
        }
        Ok(())
    }

    pub fn claims(&self, side: Stance) -> &[String] {
        match side {
            Stance::Pro => &self.pro_claims,
            Stance::Con => &self.con_claims,
        }
    }

    /// Concluding sentences for explication on `side`.
    pub fn conclusions(&self, side: Stance) -> Vec<String> {
        let explicit = match side {
            Stance::Pro => &self.pro_conclusions,
            Stance::Con => &self.con_conclusions,
        };
        if !explicit.is_empty() {
            return explicit.clone();
        }
        self.claims(side).iter().map(|c| format!("So, {}", lowercase_first(c))).collect()
    }

    /// The same topic with the claim sides exchanged.
    pub fn swapped(&self) -> Topic {
        Topic {
            title: self.title.clone(),
            pro_claims: self.con_claims.clone(),
            con_claims: self.pro_claims.clone(),
            pro_conclusions: self.con_conclusions.clone(),
            con_conclusions: self.pro_conclusions.clone(),
        }
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Author {
    Corpus,
    Agent(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub text: String,
    pub author: Author,
    pub submitted_at: Step,
    pub stance: Option<Stance>,
    /// Hidden stance in [-1, 1]; only meaningful for the mock oracle.
    pub mock_stance: Option<f64>,
    pub conclusion_explicated: bool,
}

/// A post waiting to be appended; the timeline assigns the id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewPost {
    pub text: String,
    pub author: Author,
    pub submitted_at: Step,
    pub stance: Option<Stance>,
    pub mock_stance: Option<f64>,
    pub conclusion_explicated: bool,
}

/// Checks the 1..=70 word bound.
pub fn check_post_length(text: &str) -> Result<(), ModelError> {
    let words = word_count(text);
    if words == 0 || words > MAX_POST_WORDS {
        return Err(ModelError::RejectedPost { words, max: MAX_POST_WORDS });
    }
    Ok(())
}

/// Append-only list of every post contributed to a conversation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    posts: Vec<Post>,
    current_step: Step,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current_step(&self) -> Step {
        self.current_step
    }

    /// Move the timeline clock forward. Steps never go backwards.
    pub fn advance_to(&mut self, step: Step) -> Result<(), ModelError> {
        if step < self.current_step {
            return Err(ModelError::InvalidInput(format!(
                "cannot move timeline back from {} to {step}",
                self.current_step
            )));
        }
        self.current_step = step;
        Ok(())
    }

    pub fn append(&mut self, post: NewPost) -> Result<PostId, ModelError> {
        if post.submitted_at != self.current_step {
            return Err(ModelError::StepMismatch {
                submitted_at: post.submitted_at,
                current: self.current_step,
            });
        }
        check_post_length(&post.text)?;
        let id = PostId(self.posts.len() as u32);
        self.posts.push(Post {
            id,
            text: post.text,
            author: post.author,
            submitted_at: post.submitted_at,
            stance: post.stance,
            mock_stance: post.mock_stance,
            conclusion_explicated: post.conclusion_explicated,
        });
        Ok(id)
    }

    /// Rebuild a timeline from persisted posts, checking id sequence and
    /// submission order.
    pub fn from_posts(posts: Vec<Post>) -> Result<Timeline, ModelError> {
        let mut last = 0;
        for (i, post) in posts.iter().enumerate() {
            if post.id.0 as usize != i {
                return Err(ModelError::InvalidState(format!(
                    "post at position {i} has id {}",
                    post.id
                )));
            }
            if post.submitted_at < last {
                return Err(ModelError::InvalidState(format!(
                    "post {} submitted before its predecessor",
                    post.id
                )));
            }
            last = post.submitted_at;
        }
        Ok(Timeline { posts, current_step: last })
    }

    pub fn get(&self, id: PostId) -> Option<&Post> {
        self.posts.get(id.0 as usize)
    }

    pub fn text(&self, id: PostId) -> Result<&str, ModelError> {
        self.get(id).map(|p| p.text.as_str()).ok_or(ModelError::UnknownPost(id))
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    /// Ids of posts with `submitted_at <= t`, in submission order.
    pub fn posts_at_or_before(&self, t: Step) -> Vec<PostId> {
        // submitted_at is non-decreasing, so the matches form a prefix
        let end = self.posts.partition_point(|p| p.submitted_at <= t);
        self.posts[..end].iter().map(|p| p.id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerspectiveEntry {
    pub post: PostId,
    pub added_at: Step,
}

impl PerspectiveEntry {
    pub fn age(&self, now: Step) -> usize {
        now.saturating_sub(self.added_at)
    }
}

/// Ordered, bounded, duplicate-free list of retained posts. New posts go to
/// the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perspective {
    entries: Vec<PerspectiveEntry>,
    capacity: usize,
}

impl Perspective {
    pub fn new(capacity: usize) -> Self {
        Perspective { entries: Vec::with_capacity(capacity), capacity }
    }

    pub fn from_entries(
        capacity: usize,
        entries: Vec<PerspectiveEntry>,
    ) -> Result<Perspective, ModelError> {
        let mut p = Perspective::new(capacity);
        for e in entries {
            p.push(e.post, e.added_at)?;
        }
        Ok(p)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn free_slots(&self) -> usize {
        self.capacity.saturating_sub(self.entries.len())
    }

    pub fn entries(&self) -> &[PerspectiveEntry] {
        &self.entries
    }

    pub fn post_ids(&self) -> impl Iterator<Item = PostId> + '_ {
        self.entries.iter().map(|e| e.post)
    }

    pub fn contains(&self, post: PostId) -> bool {
        self.entries.iter().any(|e| e.post == post)
    }

    pub fn push(&mut self, post: PostId, added_at: Step) -> Result<(), ModelError> {
        if self.contains(post) {
            return Err(ModelError::DuplicateEntry(post));
        }
        if self.is_full() {
            return Err(ModelError::PerspectiveFull(self.capacity));
        }
        self.entries.push(PerspectiveEntry { post, added_at });
        Ok(())
    }

    /// Remove the entries at the given positions, keeping the relative order
    /// of the survivors.
    pub fn remove_positions(&mut self, positions: &[usize]) {
        let mut i = 0;
        self.entries.retain(|_| {
            let keep = !positions.contains(&i);
            i += 1;
            keep
        });
    }

    /// Post texts in perspective order.
    pub fn texts<'a>(&self, timeline: &'a Timeline) -> Result<Vec<&'a str>, ModelError> {
        self.post_ids().map(|id| timeline.text(id)).collect()
    }
}

/// One opinion measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpinionRecord {
    pub ppl_pro: f64,
    pub ppl_con: f64,
    pub polarity: f64,
    pub pertinence: f64,
}

impl OpinionRecord {
    pub fn from_perplexities(ppl_pro: f64, ppl_con: f64) -> OpinionRecord {
        OpinionRecord {
            ppl_pro,
            ppl_con,
            polarity: ppl_con / (ppl_pro + ppl_con),
            pertinence: (ppl_pro + ppl_con) / 2.0,
        }
    }

    /// True if polarity and pertinence match recomputation bit for bit.
    pub fn is_consistent(&self) -> bool {
        let r = OpinionRecord::from_perplexities(self.ppl_pro, self.ppl_con);
        r.polarity.to_bits() == self.polarity.to_bits()
            && r.pertinence.to_bits() == self.pertinence.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub index: usize,
    pub perspective: Perspective,
    pub opinion_history: Vec<OpinionRecord>,
    /// Polarity at the last burn-in step; `None` until then.
    pub initial_opinion: Option<f64>,
    pub pending_own_post: Option<PostId>,
}

impl AgentState {
    pub fn new(index: usize, capacity: usize) -> Self {
        AgentState {
            index,
            perspective: Perspective::new(capacity),
            opinion_history: Vec::new(),
            initial_opinion: None,
            pending_own_post: None,
        }
    }

    pub fn last_opinion(&self) -> Option<f64> {
        self.opinion_history.last().map(|r| r.polarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStepRecord {
    pub perspective: Vec<PerspectiveEntry>,
    pub opinion: OpinionRecord,
    /// The post this agent submitted at this step, if any.
    pub contributed: Option<PostId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: Step,
    pub agents: Vec<AgentStepRecord>,
}

/// Full history of one seeded conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationTrace {
    pub config: SimulationConfig,
    pub topic: Topic,
    pub seed: u64,
    pub timeline: Timeline,
    pub steps: Vec<StepRecord>,
    /// False when the run aborted early.
    pub complete: bool,
}

impl ConversationTrace {
    pub fn n_agents(&self) -> usize {
        self.steps.first().map_or(self.config.n_agents, |s| s.agents.len())
    }

    pub fn last_step(&self) -> Option<Step> {
        self.steps.last().map(|s| s.step)
    }

    pub fn record(&self, step: Step) -> Option<&StepRecord> {
        self.steps.get(step).filter(|s| s.step == step)
    }

    pub fn polarity(&self, agent: usize, step: Step) -> Option<f64> {
        self.record(step)?.agents.get(agent).map(|a| a.opinion.polarity)
    }

    /// Polarities of every agent at `step`.
    pub fn opinions_at(&self, step: Step) -> Option<Vec<f64>> {
        self.record(step).map(|s| s.agents.iter().map(|a| a.opinion.polarity).collect())
    }

    pub fn opinion_series(&self, agent: usize) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.agents.get(agent)).map(|a| a.opinion.polarity).collect()
    }

    /// Scenario label of the configuration, e.g. `homophily-listening`.
    pub fn scenario_label(&self) -> String {
        self.config.scenario().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn post(text: &str, at: Step) -> NewPost {
        NewPost {
            text: text.into(),
            author: Author::Corpus,
            submitted_at: at,
            stance: None,
            mock_stance: None,
            conclusion_explicated: false,
        }
    }

    #[test]
    fn first_append_gets_id_zero() {
        let mut tl = Timeline::new();
        assert_eq!(tl.append(post("Hello there.", 0)).unwrap(), PostId(0));
        assert_eq!(tl.len(), 1);
    }

    #[test]
    fn sequential_ids() {
        let mut tl = Timeline::new();
        let ids: Vec<_> = (0..5).map(|_| tl.append(post("x.", 0)).unwrap()).collect();
        assert_eq!(ids, (0..5).map(PostId).collect::<Vec<_>>());
    }

    #[test]
    fn seventy_one_words_rejected() {
        let mut tl = Timeline::new();
        let long = vec!["w"; 71].join(" ");
        assert_eq!(
            tl.append(post(&long, 0)),
            Err(ModelError::RejectedPost { words: 71, max: 70 })
        );
        let ok = vec!["w"; 70].join(" ");
        assert!(tl.append(post(&ok, 0)).is_ok());
        assert!(matches!(tl.append(post("   ", 0)), Err(ModelError::RejectedPost { .. })));
    }

    #[test]
    fn append_requires_current_step() {
        let mut tl = Timeline::new();
        tl.advance_to(3).unwrap();
        assert!(matches!(tl.append(post("a.", 2)), Err(ModelError::StepMismatch { .. })));
        assert!(tl.advance_to(1).is_err());
    }

    #[test]
    fn markdown_links_count_as_written() {
        assert_eq!(word_count("see [this study](https://example.org/x y) now"), 5);
    }

    #[test]
    fn posts_at_or_before_filters_by_step() {
        let mut tl = Timeline::new();
        tl.append(post("a.", 0)).unwrap();
        tl.append(post("b.", 0)).unwrap();
        tl.advance_to(2).unwrap();
        tl.append(post("c.", 2)).unwrap();
        assert_eq!(tl.posts_at_or_before(1), vec![PostId(0), PostId(1)]);
        assert_eq!(tl.posts_at_or_before(2).len(), 3);

        let mut late = Timeline::new();
        late.advance_to(4).unwrap();
        late.append(post("d.", 4)).unwrap();
        assert!(late.posts_at_or_before(3).is_empty());
    }

    #[test]
    fn perspective_rejects_duplicates_and_overflow() {
        let mut p = Perspective::new(2);
        p.push(PostId(1), 0).unwrap();
        assert_eq!(p.push(PostId(1), 0), Err(ModelError::DuplicateEntry(PostId(1))));
        p.push(PostId(2), 0).unwrap();
        assert_eq!(p.push(PostId(3), 0), Err(ModelError::PerspectiveFull(2)));
    }

    #[test]
    fn remove_positions_keeps_order() {
        let mut p = Perspective::new(5);
        for i in 0..5 {
            p.push(PostId(i), 0).unwrap();
        }
        p.remove_positions(&[1, 3]);
        assert_eq!(p.post_ids().collect::<Vec<_>>(), vec![PostId(0), PostId(2), PostId(4)]);
    }

    #[test]
    fn topic_rejects_shared_claims() {
        let err = Topic::new("t", vec!["a".into()], vec!["a".into()]).unwrap_err();
        assert_eq!(err.field, "con_claims");
        assert!(Topic::new("t", vec![], vec!["b".into()]).is_err());
    }

    #[test]
    fn derived_conclusions() {
        let t = Topic::new("t", vec!["All drugs should be legal.".into()], vec!["No.".into()])
            .unwrap();
        assert_eq!(t.conclusions(Stance::Pro), vec!["So, all drugs should be legal.".to_string()]);
    }
}

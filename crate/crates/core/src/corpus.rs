//! Stance-annotated starting corpus: validation, conclusion explication and
//! the burn-in seeding schedule.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{SeedingMode, SimulationConfig};
use crate::error::{ConfigError, ModelError};
use crate::model::{check_post_length, Author, NewPost, Stance, Step, Timeline, Topic};
use crate::rng::{substream, Purpose};
use crate::{word_count, MAX_POST_WORDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub text: String,
    pub stance: Stance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_stance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub conclusion_explicated: bool,
}

impl CorpusEntry {
    pub fn new(text: impl Into<String>, stance: Stance) -> Self {
        CorpusEntry {
            text: text.into(),
            stance,
            mock_stance: None,
            source: None,
            conclusion_explicated: false,
        }
    }

    /// Hidden stance for the mock oracle, defaulting to +-1 from the label.
    pub fn effective_mock_stance(&self) -> f64 {
        self.mock_stance.unwrap_or_else(|| self.stance.default_mock_stance())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("entry {index}: {source}")]
    Entry { index: usize, source: ModelError },
    #[error("entry {index}: mock stance {value} outside [-1, 1]")]
    MockStance { index: usize, value: f64 },
}

impl Corpus {
    /// Validate entries: non-empty corpus, 1..=70 words each, mock stances in
    /// [-1, 1]. Whitespace runs inside a text are collapsed to single spaces.
    pub fn new(entries: Vec<CorpusEntry>) -> Result<Corpus, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut clean = Vec::with_capacity(entries.len());
        for (index, mut e) in entries.into_iter().enumerate() {
            check_post_length(&e.text).map_err(|source| CorpusError::Entry { index, source })?;
            if let Some(value) = e.mock_stance {
                if !(-1.0..=1.0).contains(&value) {
                    return Err(CorpusError::MockStance { index, value });
                }
            }
            e.text = e.text.split_whitespace().collect::<Vec<_>>().join(" ");
            clean.push(e);
        }
        Ok(Corpus { entries: clean })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, stance: Stance) -> usize {
        self.entries.iter().filter(|e| e.stance == stance).count()
    }

    pub fn pro_share(&self) -> f64 {
        self.count(Stance::Pro) as f64 / self.len() as f64
    }

    /// Timeline holding every entry as a corpus post submitted at step 0.
    pub fn timeline(&self) -> Result<Timeline, ModelError> {
        let mut timeline = Timeline::new();
        for e in &self.entries {
            timeline.append(NewPost {
                text: e.text.clone(),
                author: Author::Corpus,
                submitted_at: 0,
                stance: Some(e.stance),
                mock_stance: Some(e.effective_mock_stance()),
                conclusion_explicated: e.conclusion_explicated,
            })?;
        }
        Ok(timeline)
    }
}

/// Append a concluding claim matching the stance to a uniformly chosen
/// `fraction` of entries. Entries that would exceed the word limit are left
/// as they are.
pub fn explicate_conclusions<R: Rng + ?Sized>(
    entries: &[CorpusEntry],
    topic: &Topic,
    fraction: f64,
    rng: &mut R,
) -> Vec<CorpusEntry> {
    let n = entries.len();
    let amount = ((fraction.clamp(0.0, 1.0) * n as f64) + 0.5) as usize;
    let chosen = index::sample(rng, n, amount.min(n)).into_vec();
    let mut out = entries.to_vec();
    let mut chosen_sorted = chosen;
    chosen_sorted.sort_unstable();
    for i in chosen_sorted {
        let entry = &mut out[i];
        let options = topic.conclusions(entry.stance);
        if options.is_empty() || entry.conclusion_explicated {
            continue;
        }
        let conclusion = &options[rng.random_range(0..options.len())];
        let candidate = alloc::format!("{} {}", entry.text.trim_end(), conclusion);
        if word_count(&candidate) <= MAX_POST_WORDS {
            entry.text = candidate;
            entry.conclusion_explicated = true;
        }
    }
    out
}

/// Corpus posts assigned to one agent, with the burn-in step at which each
/// enters the perspective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedPlan {
    pub additions: Vec<(Step, usize)>,
}

impl SeedPlan {
    pub fn at(&self, step: Step) -> impl Iterator<Item = usize> + '_ {
        self.additions.iter().filter(move |(s, _)| *s == step).map(|(_, i)| *i)
    }
}

/// Per agent, `capacity` distinct corpus indices drawn uniformly; agents draw
/// independently and may share posts. With ramp seeding `per_step` posts
/// enter per burn-in step.
pub fn seed_plans(corpus_len: usize, config: &SimulationConfig, seed: u64) -> Result<Vec<SeedPlan>, ConfigError> {
    let capacity = config.perspective_capacity;
    if corpus_len < capacity {
        return Err(ConfigError::new(
            "corpus",
            alloc::format!("corpus has {corpus_len} posts, perspectives need {capacity}"),
        ));
    }
    Ok((0..config.n_agents)
        .map(|agent| {
            let mut rng = substream(seed, agent, 0, Purpose::Seeding);
            let picks = index::sample(&mut rng, corpus_len, capacity).into_vec();
            let additions = picks
                .into_iter()
                .enumerate()
                .map(|(j, post)| {
                    let step = match config.seeding {
                        SeedingMode::Ramp { per_step } => j / per_step.max(1),
                        SeedingMode::Full => 0,
                    };
                    (step, post)
                })
                .collect();
            SeedPlan { additions }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use alloc::vec;
    use rand::SeedableRng;

    fn fixture(n: usize, pro: usize) -> Vec<CorpusEntry> {
        (0..n)
            .map(|i| {
                let stance = if i < pro { Stance::Pro } else { Stance::Con };
                CorpusEntry::new(alloc::format!("Entry number {i} makes a point."), stance)
            })
            .collect()
    }

    #[test]
    fn pro_share_of_fixture() {
        let c = Corpus::new(fixture(66, 44)).unwrap();
        assert_eq!(c.count(Stance::Pro), 44);
        assert!((c.pro_share() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_long_and_empty() {
        let mut entries = fixture(3, 1);
        entries[2].text = vec!["w"; 71].join(" ");
        assert!(matches!(Corpus::new(entries), Err(CorpusError::Entry { index: 2, .. })));
        assert_eq!(Corpus::new(vec![]), Err(CorpusError::Empty));
    }

    #[test]
    fn explication_example() {
        let topic = Topic::drug_legalization();
        let entries = vec![CorpusEntry::new(
            "If drugs being illegal prevented addiction, there would be no drug addicted person. Thus, there is no prevention by just keeping drugs illegal.",
            Stance::Pro,
        )];
        let out = explicate_conclusions(&entries, &topic, 1.0, &mut SimRng::seed_from_u64(0));
        assert!(out[0].text.ends_with("So, legalization of drugs is a pretty good idea."));
        assert!(out[0].conclusion_explicated);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let entries = fixture(10, 5);
        let out = explicate_conclusions(&entries, &Topic::drug_legalization(), 0.0, &mut SimRng::seed_from_u64(0));
        assert_eq!(out, entries);
    }

    #[test]
    fn full_fraction_uses_matching_side() {
        let topic = Topic::drug_legalization();
        let entries = fixture(10, 5);
        let out = explicate_conclusions(&entries, &topic, 1.0, &mut SimRng::seed_from_u64(0));
        for e in &out {
            let expected = topic.conclusions(e.stance);
            assert!(expected.iter().any(|c| e.text.ends_with(c.as_str())), "{}", e.text);
        }
        let half = explicate_conclusions(&entries, &topic, 0.5, &mut SimRng::seed_from_u64(0));
        assert_eq!(half.iter().filter(|e| e.conclusion_explicated).count(), 5);
    }

    #[test]
    fn explication_skips_overlong() {
        let long = CorpusEntry::new(vec!["w"; 69].join(" "), Stance::Con);
        let out = explicate_conclusions(core::slice::from_ref(&long), &Topic::drug_legalization(), 1.0, &mut SimRng::seed_from_u64(0));
        assert_eq!(out[0], long);
    }

    #[test]
    fn ramp_sizes() {
        let config = SimulationConfig::default();
        let plans = seed_plans(66, &config, 1).unwrap();
        let sizes: Vec<usize> = (0..5)
            .map(|t| plans[0].additions.iter().filter(|(s, _)| *s <= t).count())
            .collect();
        assert_eq!(sizes, vec![2, 4, 6, 8, 8]);
        let distinct: alloc::collections::BTreeSet<_> = plans[0].additions.iter().map(|a| a.1).collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn corpus_too_small() {
        let config = SimulationConfig::default();
        assert_eq!(seed_plans(7, &config, 1).unwrap_err().field, "corpus");
    }
}

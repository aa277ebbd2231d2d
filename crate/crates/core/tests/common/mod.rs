#![allow(dead_code)]

use agora_core::corpus::{Corpus, CorpusEntry};
use agora_core::model::NewPost;
use agora_core::oracle::{MockOracle, MockOracleParams};
use agora_core::{Author, Perspective, PostId, SimulationConfig, Stance, Step, Timeline, Topic};

pub fn stance_label(s: f64) -> Stance {
    if s >= 0.0 {
        Stance::Pro
    } else {
        Stance::Con
    }
}

/// Posts at step 0 with the given hidden stances.
pub fn timeline(stances: &[f64]) -> Timeline {
    let mut tl = Timeline::new();
    for (i, &s) in stances.iter().enumerate() {
        tl.append(NewPost {
            text: format!("Fixture post {i} argues a point."),
            author: Author::Corpus,
            submitted_at: 0,
            stance: Some(stance_label(s)),
            mock_stance: Some(s),
            conclusion_explicated: false,
        })
        .unwrap();
    }
    tl
}

pub fn mock_for(timeline: &Timeline, topic: &Topic) -> MockOracle {
    let mut oracle = MockOracle::new(topic.clone(), MockOracleParams::default());
    for p in timeline.posts() {
        oracle.insert(&p.text, p.mock_stance.unwrap()).unwrap();
    }
    oracle
}

pub fn perspective(ids: &[u32], added_at: &[Step], capacity: usize) -> Perspective {
    let mut p = Perspective::new(capacity);
    for (&id, &at) in ids.iter().zip(added_at) {
        p.push(PostId(id), at).unwrap();
    }
    p
}

/// Synthetic corpus with `pro` of `n` entries labelled pro.
pub fn corpus(n: usize, pro: usize) -> Corpus {
    Corpus::new(
        (0..n)
            .map(|i| {
                let stance = if i < pro { Stance::Pro } else { Stance::Con };
                let mut e = CorpusEntry::new(format!("Corpus entry {i} gives a reason."), stance);
                let magnitude = 0.3 + 0.7 * (i % 10) as f64 / 9.0;
                e.mock_stance = Some(if i < pro { magnitude } else { -magnitude });
                e
            })
            .collect(),
    )
    .unwrap()
}

/// Trace whose step `s` holds the polarities `series[s]`, one per agent.
pub fn trace_from_series(series: &[Vec<f64>], seed: u64) -> agora_core::ConversationTrace {
    use agora_core::model::{AgentStepRecord, OpinionRecord, StepRecord};
    let config = SimulationConfig {
        n_agents: series[0].len(),
        t_max: series.len(),
        ..SimulationConfig::default()
    };
    let steps = series
        .iter()
        .enumerate()
        .map(|(step, row)| StepRecord {
            step,
            agents: row
                .iter()
                .map(|&p| AgentStepRecord {
                    perspective: Vec::new(),
                    opinion: OpinionRecord {
                        ppl_pro: 10.0 * (1.0 - p),
                        ppl_con: 10.0 * p,
                        polarity: p,
                        pertinence: 5.0,
                    },
                    contributed: None,
                })
                .collect(),
        })
        .collect();
    agora_core::ConversationTrace {
        config,
        topic: Topic::drug_legalization(),
        seed,
        timeline: Timeline::new(),
        steps,
        complete: true,
    }
}

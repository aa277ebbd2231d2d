//! Perspective update invariants and sampling laws.

mod common;

use std::collections::BTreeSet;

use agora_core::oracle::CountingOracle;
use agora_core::rng::SimRng;
use agora_core::update::{
    confirmation, contract, eligible_posts, expand_homophily, expand_random, update_perspective, ConfirmationContext,
    PeerView, UpdateInputs, UpdateRngs,
};
use agora_core::{AgentType, ExpansionRule, Perspective, PostId, SimulationConfig, Topic};
use proptest::prelude::*;
use rand::seq::index;
use rand::{Rng, SeedableRng};

const TRIALS: usize = 100_000;

#[test]
fn contraction_frequencies_follow_age_weights() {
    // ages 1 and 7 at step 10
    let p = common::perspective(&[0, 1], &[9, 3], 8);
    let mut rng = SimRng::seed_from_u64(11);
    let mut young_dropped = 0;
    for _ in 0..TRIALS {
        if !contract(&p, 1, 0.9, 10, &mut rng).unwrap().contains(PostId(0)) {
            young_dropped += 1;
        }
    }
    let w_young = 1.0 - 0.9f64;
    let w_old = 1.0 - 0.9f64.powi(7);
    let expected = w_young / (w_young + w_old);
    let observed = young_dropped as f64 / TRIALS as f64;
    assert!((expected - 0.161).abs() < 0.001);
    assert!((observed - expected).abs() < 0.01, "{observed} vs {expected}");
}

#[test]
fn random_expansion_is_uniform() {
    let candidates: Vec<PostId> = (100..120).map(PostId).collect();
    let k = 3;
    let mut counts = vec![0usize; candidates.len()];
    let mut rng = SimRng::seed_from_u64(12);
    for _ in 0..TRIALS {
        let mut p = Perspective::new(8);
        expand_random(&mut p, &candidates, k, 1, &mut rng).unwrap();
        for id in p.post_ids() {
            counts[(id.0 - 100) as usize] += 1;
        }
    }
    let expected = k as f64 / candidates.len() as f64;
    for c in counts {
        assert!((c as f64 / TRIALS as f64 - expected).abs() < 0.01);
    }
}

#[test]
fn eligible_pool_of_three_peers_with_overlaps() {
    let own = common::perspective(&[0, 1, 2, 3, 40, 41, 42, 43], &[0; 8], 8);
    let peers = [
        common::perspective(&[0, 1, 10, 11, 12, 13, 14, 15], &[0; 8], 8),
        common::perspective(&[2, 14, 15, 20, 21, 22, 23, 24], &[0; 8], 8),
        common::perspective(&[3, 24, 30, 31, 32, 33, 34, 35], &[0; 8], 8),
    ];
    let union: BTreeSet<PostId> = peers.iter().flat_map(|p| p.post_ids()).collect();
    let pool = eligible_posts(&own, &peers);
    assert_eq!(pool.len(), union.len() - 4);
    assert!(pool.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn homophily_with_zero_exponent_matches_random_marginals() {
    // four peers with disjoint, equally sized perspectives
    let peers: Vec<Perspective> =
        (0..4).map(|j| common::perspective(&[10 * j + 10, 10 * j + 11, 10 * j + 12], &[0; 3], 8)).collect();
    let views: Vec<PeerView<'_>> = peers
        .iter()
        .enumerate()
        .map(|(j, p)| PeerView { index: j + 1, opinion: 0.1 * j as f64, perspective: p })
        .collect();
    let pool: Vec<PostId> = peers.iter().flat_map(|p| p.post_ids()).collect();
    let mut homophily = std::collections::BTreeMap::new();
    let mut random = std::collections::BTreeMap::new();
    let mut a = SimRng::seed_from_u64(1);
    let mut b = SimRng::seed_from_u64(2);
    let mut c = SimRng::seed_from_u64(3);
    for _ in 0..TRIALS {
        let mut p = Perspective::new(8);
        expand_homophily(&mut p, 0.5, &views, 1, 0.0, 1, &mut a, &mut b).unwrap();
        for id in p.post_ids() {
            *homophily.entry(id).or_insert(0usize) += 1;
        }
        let mut q = Perspective::new(8);
        expand_random(&mut q, &pool, 1, 1, &mut c).unwrap();
        for id in q.post_ids() {
            *random.entry(id).or_insert(0usize) += 1;
        }
    }
    for id in &pool {
        let h = homophily[id] as f64 / TRIALS as f64;
        let r = random[id] as f64 / TRIALS as f64;
        assert!((h - 1.0 / 12.0).abs() < 0.01 && (r - 1.0 / 12.0).abs() < 0.01, "{id}: {h} {r}");
    }
}

#[test]
fn pro_candidates_outrank_con_when_drifting_pro() {
    let topic = Topic::drug_legalization();
    let stances = [0.2, -0.2, 0.3, -0.1, 1.0, 0.8, -1.0, -0.7, 0.6, -0.5];
    let tl = common::timeline(&stances);
    let oracle = common::mock_for(&tl, &topic);
    let held = common::perspective(&[0, 1, 2, 3], &[0; 4], 8);
    let ctx = ConfirmationContext {
        timeline: &tl,
        topic: &topic,
        oracle: &oracle,
        initial_opinion: 0.5,
        previous_opinion: 0.55,
    };
    let pro: Vec<f64> = [4u32, 5, 8].iter().map(|&i| ctx.confirmation_of(PostId(i), &held).unwrap()).collect();
    let con: Vec<f64> = [6u32, 7, 9].iter().map(|&i| ctx.confirmation_of(PostId(i), &held).unwrap()).collect();
    for p in &pro {
        for c in &con {
            assert!(p > c, "{pro:?} vs {con:?}");
        }
    }
    assert_eq!(confirmation(0.5, 0.5, 0.7), 0.0);
}

#[derive(Debug, Clone)]
struct Fixture {
    stances: Vec<f64>,
    capacity: usize,
    perspectives: Vec<Vec<u32>>,
    opinions: Vec<f64>,
    own_post: bool,
    rule: ExpansionRule,
    generating: bool,
    seed: u64,
}

fn fixture() -> impl Strategy<Value = Fixture> {
    (2usize..7, 3usize..9, 0usize..3, any::<bool>(), any::<bool>(), any::<u64>()).prop_flat_map(
        |(n_agents, capacity, rule, own_post, generating, seed)| {
            let n_posts = capacity * n_agents + 4;
            (
                prop::collection::vec(-1.0f64..=1.0, n_posts),
                prop::collection::vec(0.2f64..0.8, n_agents),
            )
                .prop_map(move |(stances, opinions)| {
                    let mut rng = SimRng::seed_from_u64(seed);
                    // the last post is reserved as agent 0's fresh post
                    let perspectives = (0..n_agents)
                        .map(|_| {
                            index::sample(&mut rng, n_posts - 1, capacity).iter().map(|i| i as u32).collect()
                        })
                        .collect();
                    Fixture {
                        stances,
                        capacity,
                        perspectives,
                        opinions,
                        own_post,
                        rule: [ExpansionRule::Random, ExpansionRule::ConfirmationLazy, ExpansionRule::Homophily][rule],
                        generating,
                        seed,
                    }
                })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn update_restores_capacity_without_duplicates(f in fixture()) {
        let topic = Topic::drug_legalization();
        let tl = common::timeline(&f.stances);
        let oracle = CountingOracle::new(common::mock_for(&tl, &topic));
        let now = 6;
        let perspectives: Vec<Perspective> = f
            .perspectives
            .iter()
            .map(|ids| common::perspective(ids, &vec![1; ids.len()], f.capacity))
            .collect();
        let config = SimulationConfig {
            perspective_capacity: f.capacity,
            memory_loss_passive: 1,
            memory_loss_active: 2.min(f.capacity),
            expansion_rule: f.rule,
            agent_type: if f.generating { AgentType::GeneratingNarrow } else { AgentType::Listening },
            ..SimulationConfig::default()
        };
        let own = if f.own_post { Some(PostId(f.stances.len() as u32 - 1)) } else { None };
        let inputs = UpdateInputs {
            now,
            config: &config,
            topic: &topic,
            timeline: &tl,
            oracle: &oracle,
            previous_perspectives: &perspectives,
            previous_opinions: &f.opinions,
        };
        let peers: Vec<usize> = (0..perspectives.len()).collect();
        let mut rng = SimRng::seed_from_u64(f.seed);
        let (mut r1, mut r2, mut r3) = (rng.clone(), SimRng::seed_from_u64(rng.random()), SimRng::seed_from_u64(rng.random()));
        let out = update_perspective(0, own, 0.5, &peers, &inputs, UpdateRngs { drop: &mut r1, expand: &mut r2, peer_draw: &mut r3 }).unwrap();
        let p = out.perspective;

        let ids: Vec<PostId> = p.post_ids().collect();
        let distinct: BTreeSet<PostId> = ids.iter().copied().collect();
        prop_assert_eq!(distinct.len(), ids.len());
        prop_assert!(p.len() <= f.capacity);
        let others: BTreeSet<PostId> = perspectives[1..].iter().flat_map(|q| q.post_ids()).collect();
        let fresh = others.iter().filter(|id| !perspectives[0].contains(**id)).count();
        if fresh >= f.capacity {
            prop_assert_eq!(p.len(), f.capacity);
        }
        for e in p.entries() {
            prop_assert!(e.added_at == now || perspectives[0].contains(e.post));
        }
        if let Some(own) = own {
            prop_assert!(p.contains(own));
        }
        let k = config.memory_loss();
        match f.rule {
            ExpansionRule::Homophily | ExpansionRule::Random => prop_assert_eq!(oracle.score_calls(), 0),
            ExpansionRule::ConfirmationLazy => {
                prop_assert!(oracle.score_calls() <= 2 * k);
                prop_assert_eq!(oracle.score_calls(), out.confirmation_scorings);
            }
        }
    }
}

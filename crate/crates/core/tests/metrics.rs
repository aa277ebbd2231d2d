//! Conversation and ensemble metrics on hand-built traces.

mod common;

use agora_core::analysis::{
    aggregate_ensemble, conversation_metrics, divergence_metrics, opinion_triples, volatility, AnalysisError,
};
use proptest::prelude::*;

/// 8 steps, two agents: one jumps by 0.2 once, one oscillates by 0.05.
fn series() -> Vec<Vec<f64>> {
    (0..8)
        .map(|s| {
            let a = if s >= 6 { 0.7 } else { 0.5 };
            let b = if s % 2 == 0 { 0.40 } else { 0.45 };
            vec![a, b]
        })
        .collect()
}

#[test]
fn triples_take_three_consecutive_steps() {
    let trace = common::trace_from_series(&series(), 1);
    let t = opinion_triples(&trace, 7).unwrap();
    assert_eq!(t, vec![[0.5, 0.7, 0.7], [0.45, 0.40, 0.45]]);
    assert!(matches!(opinion_triples(&trace, 6), Err(AnalysisError::InvalidInput(_))));
    assert!(matches!(opinion_triples(&trace, 8), Err(AnalysisError::InvalidInput(_))));
}

#[test]
fn volatility_over_window() {
    let trace = common::trace_from_series(&series(), 1);
    let v = volatility(&trace, 5, 7).unwrap();
    // agent 0: one jump of 0.2 in three steps; agent 1: 0.05 every step
    assert!((v.per_agent[0] - 0.04 / 3.0).abs() < 1e-12);
    assert!((v.per_agent[1] - 0.0025).abs() < 1e-12);
    let single = volatility(&trace, 6, 6).unwrap();
    assert!((single.per_agent[0] - 0.04).abs() < 1e-12);
    let pair = volatility(&trace, 6, 7).unwrap();
    assert!((pair.pooled - (0.02 + 0.0025) / 2.0).abs() < 1e-12);
    assert!((pair.pooled - 0.01125).abs() < 1e-12);
}

#[test]
fn divergence_of_extremes() {
    assert_eq!(divergence_metrics(&[0.0, 1.0]).unwrap(), (0.25, 1.0));
    assert_eq!(divergence_metrics(&[0.3; 5]).unwrap(), (0.0, 0.0));
    assert!(divergence_metrics(&[]).is_err());
}

proptest! {
    #[test]
    fn divergence_matches_pairwise_formula(xs in prop::collection::vec(0.0f64..=1.0, 20)) {
        // population variance equals half the mean squared pairwise difference
        let n = xs.len() as f64;
        let pairwise: f64 = xs.iter().flat_map(|a| xs.iter().map(move |b| (a - b) * (a - b))).sum::<f64>() / (2.0 * n * n);
        let spread = xs.iter().flat_map(|a| xs.iter().map(move |b| a - b)).fold(0.0, f64::max);
        let (var, mm) = divergence_metrics(&xs).unwrap();
        prop_assert!((var - pairwise).abs() < 1e-12);
        prop_assert!((mm - spread).abs() < 1e-15);
        prop_assert!(var <= mm * mm / 4.0 + 1e-15);
    }
}

fn consensus_series(n_steps: usize, n_agents: usize, split: bool) -> Vec<Vec<f64>> {
    (0..n_steps)
        .map(|_| {
            (0..n_agents)
                .map(|i| {
                    let base = if split && i % 2 == 1 { 0.8 } else { 0.3 };
                    base + 0.001 * i as f64
                })
                .collect()
        })
        .collect()
}

#[test]
fn flags_for_consensus_and_bipolar_runs() {
    let one = conversation_metrics(&common::trace_from_series(&consensus_series(10, 20, false), 1), None).unwrap();
    assert!(one.full_consensus && !one.bipolarization);
    assert_eq!((one.n_clusters, one.coverage, one.evaluated_at), (1, 1.0, 9));
    assert_eq!(one.mean_volatility, 0.0);
    assert_eq!(one.mean_pertinence, 5.0);
    let two = conversation_metrics(&common::trace_from_series(&consensus_series(10, 20, true), 2), None).unwrap();
    assert!(two.bipolarization && !two.full_consensus);
    assert!((two.variance - 0.0625).abs() < 1e-3);
}

#[test]
fn ensemble_ratio_in_percent() {
    let traces: Vec<_> = (0..30)
        .map(|i| common::trace_from_series(&consensus_series(10, 20, i < 3), i as u64))
        .collect();
    let report = aggregate_ensemble(&traces, None).unwrap();
    assert_eq!(report.n_runs, 30);
    assert!((report.bipolarization_ratio - 10.0).abs() < 1e-9);
    assert!((report.full_consensus_ratio - 90.0).abs() < 1e-9);
    assert!((report.n_clusters - 33.0 / 30.0).abs() < 1e-12);

    let single = aggregate_ensemble(&traces[..1], Some(8)).unwrap();
    assert_eq!(single.n_runs, 1);
    assert_eq!(single.evaluated_at, 8);
    assert_eq!(single.bipolarization_ratio, 100.0);
}

#[test]
fn ensemble_rejects_mixed_configuration() {
    let mut traces: Vec<_> = (0..3).map(|i| common::trace_from_series(&consensus_series(10, 20, false), i)).collect();
    traces[2].config.epsilon = 0.07;
    assert_eq!(aggregate_ensemble(&traces, None), Err(AnalysisError::MixedConfig { index: 2, seed: 2 }));
    assert_eq!(aggregate_ensemble(&[], None), Err(AnalysisError::EmptyEnsemble));
}

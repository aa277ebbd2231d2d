//! Per-conversation and per-ensemble metrics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::dbscan::{density_cluster, ClusteringResult, Point, DEFAULT_EPS, DEFAULT_MIN_SAMPLES};
use crate::model::{ConversationTrace, Step};

/// Coverage above which a clustering counts as bipolar or consensual.
pub const COVERAGE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("run {index} (seed {seed}) has a different configuration than run 0")]
    MixedConfig { index: usize, seed: u64 },
}

/// Per agent, the polarities at `t - 2`, `t - 1` and `t`.
pub fn opinion_triples(trace: &ConversationTrace, t: Step) -> Result<Vec<Point>, AnalysisError> {
    let burn_in = trace.config.burn_in;
    if t < burn_in + 2 {
        return Err(AnalysisError::InvalidInput(alloc::format!(
            "triples need t >= {}, got {t}",
            burn_in + 2
        )));
    }
    let rows = [t - 2, t - 1, t].map(|s| trace.opinions_at(s));
    let [Some(a), Some(b), Some(c)] = rows else {
        return Err(AnalysisError::InvalidInput(alloc::format!("step {t} is not in the trace")));
    };
    Ok((0..a.len()).map(|i| [a[i], b[i], c[i]]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterFlags {
    pub bipolarization: bool,
    pub full_consensus: bool,
}

pub fn clustering_metrics(result: &ClusteringResult) -> ClusterFlags {
    let dense = result.coverage > COVERAGE_THRESHOLD;
    ClusterFlags {
        bipolarization: dense && result.n_clusters == 2,
        full_consensus: dense && result.n_clusters == 1,
    }
}

/// Population variance and max-min spread.
pub fn divergence_metrics(opinions: &[f64]) -> Result<(f64, f64), AnalysisError> {
    if opinions.is_empty() {
        return Err(AnalysisError::InvalidInput("no opinions".into()));
    }
    let n = opinions.len() as f64;
    let mean = opinions.iter().sum::<f64>() / n;
    let variance = opinions.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / n;
    let max = opinions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = opinions.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((variance, max - min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volatility {
    pub per_agent: Vec<f64>,
    pub pooled: f64,
}

/// Mean squared one-step change over steps `from..=to`, each compared with
/// its predecessor.
pub fn volatility(trace: &ConversationTrace, from: Step, to: Step) -> Result<Volatility, AnalysisError> {
    if from == 0 || from > to || trace.record(to).is_none() {
        return Err(AnalysisError::InvalidInput(alloc::format!(
            "window {from}..={to} not inside the trace"
        )));
    }
    let per_agent: Vec<f64> = (0..trace.n_agents())
        .map(|i| {
            let series = trace.opinion_series(i);
            let sum: f64 = (from..=to)
                .map(|s| {
                    let d = series[s] - series[s - 1];
                    d * d
                })
                .sum();
            sum / (to - from + 1) as f64
        })
        .collect();
    let pooled = per_agent.iter().sum::<f64>() / per_agent.len().max(1) as f64;
    Ok(Volatility { per_agent, pooled })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMetrics {
    pub coverage: f64,
    pub n_clusters: usize,
    pub bipolarization: bool,
    pub full_consensus: bool,
    pub variance: f64,
    pub max_min_spread: f64,
    pub mean_volatility: f64,
    pub mean_pertinence: f64,
    pub evaluated_at: Step,
}

/// Metrics of one conversation at `evaluate_at` (default: its final step).
/// Volatility and pertinence average over the post-burn-in window ending
/// there.
pub fn conversation_metrics(
    trace: &ConversationTrace,
    evaluate_at: Option<Step>,
) -> Result<ConversationMetrics, AnalysisError> {
    let t = match evaluate_at {
        Some(t) => t,
        None => trace
            .last_step()
            .ok_or_else(|| AnalysisError::InvalidInput("trace has no steps".into()))?,
    };
    let points = opinion_triples(trace, t)?;
    let clusters = density_cluster(&points, DEFAULT_EPS, DEFAULT_MIN_SAMPLES);
    let flags = clustering_metrics(&clusters);
    let opinions: Vec<f64> = points.iter().map(|p| p[2]).collect();
    let (variance, max_min_spread) = divergence_metrics(&opinions)?;
    let from = trace.config.burn_in.max(1);
    let vol = volatility(trace, from, t)?;
    let pertinences: Vec<f64> = trace.steps[from..=t]
        .iter()
        .flat_map(|s| s.agents.iter().map(|a| a.opinion.pertinence))
        .collect();
    let mean_pertinence = pertinences.iter().sum::<f64>() / pertinences.len() as f64;
    Ok(ConversationMetrics {
        coverage: clusters.coverage,
        n_clusters: clusters.n_clusters,
        bipolarization: flags.bipolarization,
        full_consensus: flags.full_consensus,
        variance,
        max_min_spread,
        mean_volatility: vol.pooled,
        mean_pertinence,
        evaluated_at: t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub metrics: ConversationMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub n_runs: usize,
    pub coverage: f64,
    pub n_clusters: f64,
    /// Percent of runs ending bipolar.
    pub bipolarization_ratio: f64,
    /// Percent of runs ending in full consensus.
    pub full_consensus_ratio: f64,
    pub variance: f64,
    pub max_min_spread: f64,
    pub mean_volatility: f64,
    pub mean_pertinence: f64,
    pub evaluated_at: Step,
    pub runs: Vec<RunRow>,
}

fn mean_by(rows: &[RunRow], f: impl Fn(&ConversationMetrics) -> f64) -> f64 {
    rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / rows.len() as f64
}

fn percent(rows: &[RunRow], f: impl Fn(&ConversationMetrics) -> bool) -> f64 {
    100.0 * rows.iter().filter(|r| f(&r.metrics)).count() as f64 / rows.len() as f64
}

/// Ensemble means and ratios from per-run rows.
pub fn summarize(scenario: String, runs: Vec<RunRow>) -> Result<ScenarioReport, AnalysisError> {
    let Some(first) = runs.first() else {
        return Err(AnalysisError::EmptyEnsemble);
    };
    let evaluated_at = first.metrics.evaluated_at;
    Ok(ScenarioReport {
        scenario,
        n_runs: runs.len(),
        coverage: mean_by(&runs, |m| m.coverage),
        n_clusters: mean_by(&runs, |m| m.n_clusters as f64),
        bipolarization_ratio: percent(&runs, |m| m.bipolarization),
        full_consensus_ratio: percent(&runs, |m| m.full_consensus),
        variance: mean_by(&runs, |m| m.variance),
        max_min_spread: mean_by(&runs, |m| m.max_min_spread),
        mean_volatility: mean_by(&runs, |m| m.mean_volatility),
        mean_pertinence: mean_by(&runs, |m| m.mean_pertinence),
        evaluated_at,
        runs,
    })
}

/// Analyze every trace of one scenario. All traces must share configuration
/// and topic.
pub fn aggregate_ensemble(
    traces: &[ConversationTrace],
    evaluate_at: Option<Step>,
) -> Result<ScenarioReport, AnalysisError> {
    let Some(first) = traces.first() else {
        return Err(AnalysisError::EmptyEnsemble);
    };
    let mut runs = Vec::with_capacity(traces.len());
    for (index, trace) in traces.iter().enumerate() {
        if trace.config != first.config || trace.topic != first.topic {
            return Err(AnalysisError::MixedConfig { index, seed: trace.seed });
        }
        runs.push(RunRow { seed: trace.seed, metrics: conversation_metrics(trace, evaluate_at)? });
    }
    summarize(first.scenario_label(), runs)
}

//! Trace analysis: clustering of opinion triples, polarization flags,
//! divergence, volatility and pertinence.

pub mod dbscan;
pub mod metrics;

pub use dbscan::{density_cluster, ClusteringResult, Point, DEFAULT_EPS, DEFAULT_MIN_SAMPLES};
pub use metrics::{
    aggregate_ensemble, clustering_metrics, conversation_metrics, divergence_metrics, opinion_triples,
    summarize, volatility, AnalysisError, ClusterFlags, ConversationMetrics, RunRow, ScenarioReport,
    Volatility, COVERAGE_THRESHOLD,
};

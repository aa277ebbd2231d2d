//! Analysis of a directory of traces into report files.
//!
//! Outputs: `report.csv` (one row per run plus one summary row per
//! scenario), `plot_data.csv` (long format: metric, scenario, value) and
//! `report.json` (the same numbers with metadata).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use agora_core::analysis::{aggregate_ensemble, ScenarioReport};
use agora_core::{ConversationTrace, Scenario, Step};
use serde::Serialize;

use crate::trace_io::load_trace;

pub const REPORT_FORMAT: &str = "agora-report/1";

/// Metric columns shared by the table and the plot data.
pub const METRICS: [&str; 8] = [
    "coverage",
    "n_clusters",
    "bipolarization",
    "full_consensus",
    "variance",
    "max_min_spread",
    "mean_volatility",
    "mean_pertinence",
];

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub format: &'static str,
    pub variance: &'static str,
    pub volatility_window: &'static str,
    pub ratios: &'static str,
    pub scenarios: Vec<ScenarioReport>,
    pub skipped: Vec<Skipped>,
}

fn collect_traces(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_traces(&path, found)?;
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            found.push(path);
        }
    }
    Ok(())
}

fn grid_rank(label: &str) -> usize {
    Scenario::grid().position(|s| s.to_string() == label).unwrap_or(usize::MAX)
}

/// Sort key placing grid scenarios in grid order, anything else after.
fn scenario_key(trace: &ConversationTrace) -> (usize, String, String) {
    let label = trace.scenario_label();
    let config = serde_json::to_string(&(&trace.config, &trace.topic)).expect("config serializes");
    (grid_rank(&label), label, config)
}

/// Analyze every `*.jsonl` trace below `dir`. Corrupt traces and aborted
/// runs are listed in `skipped`; runs sharing scenario and configuration are
/// aggregated together.
pub fn analyze_dir(dir: &Path, evaluate_at: Option<Step>) -> anyhow::Result<Report> {
    let mut paths = Vec::new();
    collect_traces(dir, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no traces found in {}", dir.display());
    }
    let mut groups: BTreeMap<(usize, String, String), Vec<ConversationTrace>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in paths {
        match load_trace(&path) {
            Ok(trace) if trace.complete => groups.entry(scenario_key(&trace)).or_default().push(trace),
            Ok(_) => skipped.push(Skipped { path, reason: "incomplete run".into() }),
            Err(e) => {
                log::error!("{}: {e}", path.display());
                skipped.push(Skipped { path, reason: e.to_string() });
            }
        }
    }
    let mut scenarios = Vec::new();
    for (_, mut traces) in groups {
        traces.sort_by_key(|t| t.seed);
        scenarios.push(aggregate_ensemble(&traces, evaluate_at)?);
    }
    Ok(Report {
        format: REPORT_FORMAT,
        variance: "population",
        volatility_window: "burn_in..=evaluated_at",
        ratios: "percent of runs",
        scenarios,
        skipped,
    })
}

fn summary_values(r: &ScenarioReport) -> [f64; 8] {
    [
        r.coverage,
        r.n_clusters,
        r.bipolarization_ratio,
        r.full_consensus_ratio,
        r.variance,
        r.max_min_spread,
        r.mean_volatility,
        r.mean_pertinence,
    ]
}

pub fn write_table(report: &Report, out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["scenario", "row", "seed"];
    header.extend(METRICS);
    header.push("evaluated_at");
    w.write_record(&header)?;
    for s in &report.scenarios {
        for run in &s.runs {
            let m = &run.metrics;
            w.write_record([
                s.scenario.clone(),
                "run".into(),
                run.seed.to_string(),
                m.coverage.to_string(),
                m.n_clusters.to_string(),
                (m.bipolarization as u8).to_string(),
                (m.full_consensus as u8).to_string(),
                m.variance.to_string(),
                m.max_min_spread.to_string(),
                m.mean_volatility.to_string(),
                m.mean_pertinence.to_string(),
                m.evaluated_at.to_string(),
            ])?;
        }
        let mut row = vec![s.scenario.clone(), "summary".into(), s.n_runs.to_string()];
        row.extend(summary_values(s).iter().map(f64::to_string));
        row.push(s.evaluated_at.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_data(report: &Report, out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "scenario", "value"])?;
    for (i, metric) in METRICS.iter().enumerate() {
        for s in &report.scenarios {
            w.write_record([metric.to_string(), s.scenario.clone(), summary_values(s)[i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the three report files into `out` and return their paths.
pub fn write_report(report: &Report, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let table = out.join("report.csv");
    let plot = out.join("plot_data.csv");
    let json = out.join("report.json");
    write_table(report, fs::File::create(&table)?)?;
    write_plot_data(report, fs::File::create(&plot)?)?;
    fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(vec![table, plot, json])
}

//! Oracle backends, parallel ensembles and the output directory layout.
//!
//! Layout under the output directory: `<scenario>/run-NNNN.jsonl` per run
//! and one `manifest.json` describing the effective settings and every
//! run's status.

use std::fs;
use std::path::{Path, PathBuf};

use agora_core::corpus::Corpus;
use agora_core::engine::{run_conversation, AgentExecutor, Sequential};
use agora_core::oracle::{GenerateRequest, MockOracle, Oracle, OracleError, ScoreRequest};
use agora_core::rng::run_seed;
use agora_core::{ConversationTrace, SimulationConfig, Topic};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::remote::RemoteOracle;
use crate::settings::{Backend, Settings};
use crate::trace_io::save_trace;

pub const MANIFEST_FORMAT: &str = "agora-manifest/1";

/// Runs the agents of one step on the rayon pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl AgentExecutor for RayonExecutor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[derive(Debug)]
pub enum AnyOracle {
    Mock(MockOracle),
    Remote(RemoteOracle),
}

impl Oracle for AnyOracle {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>, OracleError> {
        match self {
            AnyOracle::Mock(o) => o.score(request),
            AnyOracle::Remote(o) => o.score(request),
        }
    }

    fn generate(&self, request: &GenerateRequest, rng: &mut dyn RngCore) -> Result<String, OracleError> {
        match self {
            AnyOracle::Mock(o) => o.generate(request, rng),
            AnyOracle::Remote(o) => o.generate(request, rng),
        }
    }
}

pub fn build_oracle(settings: &Settings, corpus: &Corpus) -> anyhow::Result<AnyOracle> {
    Ok(match settings.backend {
        Backend::Mock => AnyOracle::Mock(MockOracle::from_corpus(settings.topic(), corpus, settings.mock)?),
        Backend::Remote => {
            let endpoint = settings
                .remote
                .endpoint
                .as_deref()
                .ok_or_else(|| anyhow::anyhow!("remote backend needs an endpoint"))?;
            AnyOracle::Remote(RemoteOracle::new(endpoint, settings.remote.clone())?)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub scenario: String,
    pub index: u64,
    pub seed: u64,
    /// Trace path relative to the output directory.
    pub trace: PathBuf,
    pub status: RunStatus,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub entries: usize,
    pub pro: usize,
    pub con: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub settings: Settings,
    pub corpus: CorpusSummary,
    pub runs: Vec<RunEntry>,
    pub failures: usize,
}

impl Manifest {
    pub fn load(path: &Path) -> anyhow::Result<Manifest> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

pub fn trace_path(scenario: &str, index: u64) -> PathBuf {
    PathBuf::from(scenario).join(format!("run-{index:04}.jsonl"))
}

/// One conversation; an aborted run still yields its partial trace.
pub fn execute_run<O, E>(
    config: &SimulationConfig,
    topic: &Topic,
    corpus: &Corpus,
    oracle: &O,
    index: u64,
    executor: &E,
) -> (ConversationTrace, Option<String>)
where
    O: Oracle + Sync + ?Sized,
    E: AgentExecutor,
{
    let seed = run_seed(config.master_seed, index);
    match run_conversation(config, topic, corpus, oracle, seed, executor) {
        Ok(trace) => (trace, None),
        Err(failure) => {
            log::error!("{failure}");
            (*failure.trace, Some(failure.error.to_string()))
        }
    }
}

fn persist(out: &Path, index: u64, trace: &ConversationTrace, error: Option<String>) -> RunEntry {
    let scenario = trace.scenario_label();
    let rel = trace_path(&scenario, index);
    let path = out.join(&rel);
    let mut error = error;
    let written = path
        .parent()
        .map_or(Ok(()), fs::create_dir_all)
        .and_then(|_| save_trace(trace, &path));
    if let Err(e) = written {
        error.get_or_insert_with(|| format!("cannot write {}: {e}", path.display()));
    }
    RunEntry {
        scenario,
        index,
        seed: trace.seed,
        trace: rel,
        status: if error.is_none() && trace.complete { RunStatus::Complete } else { RunStatus::Failed },
        steps: trace.steps.len(),
        error,
    }
}

/// Run `settings.ensemble.runs` conversations per scenario config, in
/// parallel, writing each trace as soon as it finishes. Run `i` of every
/// scenario uses the same derived seed, so scenarios can be compared pairwise.
pub fn run_ensemble<O: Oracle + Sync + ?Sized>(
    settings: &Settings,
    corpus: &Corpus,
    oracle: &O,
    out: &Path,
) -> anyhow::Result<Manifest> {
    fs::create_dir_all(out)?;
    let topic = settings.topic();
    let configs = settings.scenario_configs();
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..settings.ensemble.runs as u64).map(move |i| (c, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(settings.ensemble.workers).build()?;
    let runs: Vec<RunEntry> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, index)| {
                let (trace, error) = execute_run(&configs[c], &topic, corpus, oracle, index, &Sequential);
                let entry = persist(out, index, &trace, error);
                log::info!("{} run {} finished: {:?}", entry.scenario, index, entry.status);
                entry
            })
            .collect()
    });
    let failures = runs.iter().filter(|r| r.status == RunStatus::Failed).count();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        settings: settings.clone(),
        corpus: CorpusSummary {
            entries: corpus.len(),
            pro: corpus.count(agora_core::Stance::Pro),
            con: corpus.count(agora_core::Stance::Con),
        },
        runs,
        failures,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

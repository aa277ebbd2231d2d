//! Run configuration: TOML file, command-line overrides and the resolved
//! settings embedded in every output manifest.

use std::fs;
use std::path::{Path, PathBuf};

use agora_core::corpus::{explicate_conclusions, Corpus};
use agora_core::oracle::MockOracleParams;
use agora_core::rng::{global_stream, Purpose};
use agora_core::{ConfigError, Scenario, SimulationConfig, Step, Topic};
use serde::{Deserialize, Serialize};

use crate::corpus_io::{load_corpus, read_corpus};
use crate::remote::{RemoteSettings, ENDPOINT_ENV};

/// Synthetic corpus used when no corpus file is configured.
pub const BUILTIN_CORPUS: &str = include_str!("../../../fixtures/corpus.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub runs: usize,
    /// Parallel runs; 0 picks the number of CPUs.
    pub workers: usize,
    pub grid: bool,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { runs: 1, workers: 0, grid: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Step at which metrics are evaluated; defaults to the final step.
    pub evaluate_at: Option<Step>,
}

/// Contents of a run configuration file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Corpus file; the built-in synthetic corpus when absent.
    pub corpus: Option<PathBuf>,
    pub backend: Backend,
    /// Scenario label such as `homophily-listening`; overrides the rule
    /// fields of `simulation`.
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub simulation: SimulationConfig,
    pub topic: Option<Topic>,
    pub mock: MockOracleParams,
    pub remote: RemoteSettings,
    pub ensemble: EnsembleSettings,
    pub analysis: AnalysisSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub workers: Option<usize>,
    pub backend: Option<Backend>,
    pub endpoint: Option<String>,
    pub scenario: Option<String>,
    pub grid: bool,
    pub out: Option<PathBuf>,
    pub evaluate_at: Option<Step>,
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ConfigError),
}

impl Settings {
    /// Parse a TOML file. A relative corpus path is taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Settings, SettingsError> {
        let text = fs::read_to_string(path)
            .map_err(|source| SettingsError::Io { path: path.display().to_string(), source })?;
        let mut settings: Settings = toml::from_str(&text)
            .map_err(|e| SettingsError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        if let (Some(corpus), Some(dir)) = (&settings.corpus, path.parent()) {
            if corpus.is_relative() {
                settings.corpus = Some(dir.join(corpus));
            }
        }
        Ok(settings)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(c) = &o.corpus {
            self.corpus = Some(c.clone());
        }
        if let Some(seed) = o.seed {
            self.simulation.master_seed = seed;
        }
        if let Some(runs) = o.runs {
            self.ensemble.runs = runs;
        }
        if let Some(workers) = o.workers {
            self.ensemble.workers = workers;
        }
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(e) = &o.endpoint {
            self.remote.endpoint = Some(e.clone());
        }
        if let Some(s) = &o.scenario {
            self.scenario = Some(s.clone());
        }
        if o.grid {
            self.ensemble.grid = true;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(t) = o.evaluate_at {
            self.analysis.evaluate_at = Some(t);
        }
    }

    /// Fill the endpoint from the environment, fold the scenario label into
    /// the simulation config and check every field.
    pub fn resolve(mut self) -> Result<Settings, SettingsError> {
        if self.remote.endpoint.is_none() {
            self.remote.endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty());
        }
        if let Some(label) = &self.scenario {
            let scenario: Scenario = label.parse()?;
            self.simulation = self.simulation.with_scenario(scenario);
        }
        self.simulation.validate().map_err(|e| e.within("simulation"))?;
        if let Some(topic) = &self.topic {
            topic.validate().map_err(|e| e.within("topic"))?;
        }
        if let Some(path) = &self.corpus {
            if !path.is_file() {
                return Err(ConfigError::new("corpus", format!("no corpus file at {}", path.display())).into());
            }
        }
        if self.backend == Backend::Remote && self.remote.endpoint.is_none() {
            return Err(ConfigError::new(
                "remote.endpoint",
                format!("required for the remote backend (or set {ENDPOINT_ENV})"),
            )
            .into());
        }
        if self.ensemble.runs == 0 {
            return Err(ConfigError::new("ensemble.runs", "must be positive").into());
        }
        if let Some(t) = self.analysis.evaluate_at {
            if t < self.simulation.burn_in + 2 || t >= self.simulation.t_max {
                return Err(ConfigError::new(
                    "analysis.evaluate_at",
                    format!("must be in {}..{}", self.simulation.burn_in + 2, self.simulation.t_max),
                )
                .into());
            }
        }
        Ok(self)
    }

    pub fn topic(&self) -> Topic {
        self.topic.clone().unwrap_or_else(Topic::drug_legalization)
    }

    /// Load the corpus and apply conclusion explication, seeded by the
    /// master seed so every run of an ensemble shares one corpus.
    pub fn prepare_corpus(&self) -> anyhow::Result<Corpus> {
        let raw = match &self.corpus {
            Some(path) => load_corpus(path)?,
            None => read_corpus(BUILTIN_CORPUS.as_bytes())?,
        };
        let mut rng = global_stream(self.simulation.master_seed, Purpose::Explication);
        let entries = explicate_conclusions(
            raw.entries(),
            &self.topic(),
            self.simulation.explication_fraction,
            &mut rng,
        );
        Ok(Corpus::new(entries)?)
    }

    /// Simulation configs to run: the whole grid or the configured scenario.
    pub fn scenario_configs(&self) -> Vec<SimulationConfig> {
        if self.ensemble.grid {
            Scenario::grid().map(|s| self.simulation.clone().with_scenario(s)).collect()
        } else {
            vec![self.simulation.clone()]
        }
    }
}

//! Simulation parameters and scenario labels.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerRule {
    Universal,
    BoundedConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionRule {
    Random,
    ConfirmationLazy,
    Homophily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentType {
    #[serde(rename = "listening")]
    Listening,
    #[serde(rename = "gen_narrow")]
    GeneratingNarrow,
    #[serde(rename = "gen_creat")]
    GeneratingCreative,
}

impl AgentType {
    pub const ALL: [AgentType; 3] =
        [AgentType::Listening, AgentType::GeneratingNarrow, AgentType::GeneratingCreative];

    pub fn label(self) -> &'static str {
        match self {
            AgentType::Listening => "listening",
            AgentType::GeneratingNarrow => "gen_narrow",
            AgentType::GeneratingCreative => "gen_creat",
        }
    }

    pub fn is_generating(self) -> bool {
        !matches!(self, AgentType::Listening)
    }

    pub fn profile(self) -> Option<DecodingProfile> {
        match self {
            AgentType::Listening => None,
            AgentType::GeneratingNarrow => Some(DecodingProfile::Narrow),
            AgentType::GeneratingCreative => Some(DecodingProfile::Creative),
        }
    }
}

/// The four peer/perspective updating combinations of the scenario grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatingRule {
    Random,
    BoundedConfidence,
    ConfirmationBias,
    Homophily,
}

impl UpdatingRule {
    pub const ALL: [UpdatingRule; 4] = [
        UpdatingRule::Random,
        UpdatingRule::BoundedConfidence,
        UpdatingRule::ConfirmationBias,
        UpdatingRule::Homophily,
    ];

    pub fn label(self) -> &'static str {
        match self {
            UpdatingRule::Random => "random",
            UpdatingRule::BoundedConfidence => "bounded_confidence",
            UpdatingRule::ConfirmationBias => "confirmation_bias",
            UpdatingRule::Homophily => "homophily",
        }
    }

    pub fn rules(self) -> (PeerRule, ExpansionRule) {
        match self {
            UpdatingRule::Random => (PeerRule::Universal, ExpansionRule::Random),
            UpdatingRule::BoundedConfidence => (PeerRule::BoundedConfidence, ExpansionRule::Random),
            UpdatingRule::ConfirmationBias => (PeerRule::Universal, ExpansionRule::ConfirmationLazy),
            UpdatingRule::Homophily => (PeerRule::Universal, ExpansionRule::Homophily),
        }
    }

    pub fn from_rules(peer: PeerRule, expansion: ExpansionRule) -> Option<UpdatingRule> {
        UpdatingRule::ALL.into_iter().find(|u| u.rules() == (peer, expansion))
    }
}

/// One cell of the updating × agent-type grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub peer_rule: PeerRule,
    pub expansion_rule: ExpansionRule,
    pub agent_type: AgentType,
}

impl Scenario {
    pub fn new(updating: UpdatingRule, agent_type: AgentType) -> Scenario {
        let (peer_rule, expansion_rule) = updating.rules();
        Scenario { peer_rule, expansion_rule, agent_type }
    }

    /// All twelve grid scenarios, updating-major.
    pub fn grid() -> impl Iterator<Item = Scenario> {
        UpdatingRule::ALL
            .into_iter()
            .flat_map(|u| AgentType::ALL.into_iter().map(move |a| Scenario::new(u, a)))
    }

    pub fn updating(&self) -> Option<UpdatingRule> {
        UpdatingRule::from_rules(self.peer_rule, self.expansion_rule)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.updating() {
            Some(u) => write!(f, "{}-{}", u.label(), self.agent_type.label()),
            None => write!(
                f,
                "{:?}+{:?}-{}",
                self.peer_rule,
                self.expansion_rule,
                self.agent_type.label()
            ),
        }
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (u, a) = s
            .split_once('-')
            .ok_or_else(|| ConfigError::new("scenario", format!("expected <updating>-<agent type>, got {s:?}")))?;
        let updating = UpdatingRule::ALL
            .into_iter()
            .find(|r| r.label() == u)
            .ok_or_else(|| ConfigError::new("scenario", format!("unknown updating rule {u:?}")))?;
        let agent = AgentType::ALL
            .into_iter()
            .find(|r| r.label() == a)
            .ok_or_else(|| ConfigError::new("scenario", format!("unknown agent type {a:?}")))?;
        Ok(Scenario::new(updating, agent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default = "default_num_beams")]
    pub num_beams: u32,
    #[serde(default = "default_repetition_penalty")]
    pub repetition_penalty: f64,
    #[serde(default = "default_true")]
    pub sampling: bool,
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    /// Token budget requested from a remote backend; the word limit is
    /// enforced client-side.
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
}

fn default_num_beams() -> u32 {
    5
}
fn default_repetition_penalty() -> f64 {
    1.2
}
fn default_true() -> bool {
    true
}
fn default_max_words() -> usize {
    crate::MAX_POST_WORDS
}
fn default_max_new_tokens() -> u32 {
    120
}

impl DecodingParams {
    pub fn with_sampling(temperature: f64, top_p: f64) -> Self {
        DecodingParams {
            temperature,
            top_p,
            num_beams: default_num_beams(),
            repetition_penalty: default_repetition_penalty(),
            sampling: true,
            max_words: default_max_words(),
            max_new_tokens: default_max_new_tokens(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ConfigError::new("temperature", "must be positive"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ConfigError::new("top_p", "must be in (0, 1]"));
        }
        if self.num_beams == 0 {
            return Err(ConfigError::new("num_beams", "must be positive"));
        }
        if self.repetition_penalty.is_nan() || self.repetition_penalty < 1.0 {
            return Err(ConfigError::new("repetition_penalty", "must be >= 1"));
        }
        if self.max_words == 0 {
            return Err(ConfigError::new("max_words", "must be positive"));
        }
        if self.max_new_tokens == 0 {
            return Err(ConfigError::new("max_new_tokens", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodingProfile {
    Narrow,
    Creative,
}

impl DecodingProfile {
    pub fn default_params(self) -> DecodingParams {
        match self {
            DecodingProfile::Narrow => DecodingParams::with_sampling(1.0, 0.5),
            DecodingProfile::Creative => DecodingParams::with_sampling(1.4, 0.95),
        }
    }
}

/// How perspectives are filled during burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SeedingMode {
    /// Add `per_step` corpus posts per burn-in step until capacity.
    Ramp { per_step: usize },
    /// Fill the whole perspective at step 0.
    Full,
}

impl Default for SeedingMode {
    fn default() -> Self {
        SeedingMode::Ramp { per_step: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_agents: usize,
    pub perspective_capacity: usize,
    /// Number of recorded steps; steps run from 0 to `t_max - 1`.
    pub t_max: usize,
    pub relevance_deprecation: f64,
    pub memory_loss_passive: usize,
    pub memory_loss_active: usize,
    /// Carried for completeness; the lazy confirmation rule does not use it.
    pub confirmation_bias_exponent: f64,
    pub homophily_exponent: f64,
    pub epsilon: f64,
    pub contribution_probability: f64,
    pub peer_rule: PeerRule,
    pub expansion_rule: ExpansionRule,
    pub agent_type: AgentType,
    pub narrow: DecodingParams,
    pub creative: DecodingParams,
    pub burn_in: usize,
    pub seeding: SeedingMode,
    /// Share of corpus entries that get a concluding claim appended.
    pub explication_fraction: f64,
    pub master_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_agents: 20,
            perspective_capacity: 8,
            t_max: 150,
            relevance_deprecation: 0.9,
            memory_loss_passive: 1,
            memory_loss_active: 2,
            confirmation_bias_exponent: 50.0,
            homophily_exponent: 50.0,
            epsilon: 0.04,
            contribution_probability: 0.2,
            peer_rule: PeerRule::Universal,
            expansion_rule: ExpansionRule::Random,
            agent_type: AgentType::Listening,
            narrow: DecodingProfile::Narrow.default_params(),
            creative: DecodingProfile::Creative.default_params(),
            burn_in: 5,
            seeding: SeedingMode::default(),
            explication_fraction: 0.5,
            master_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            peer_rule: self.peer_rule,
            expansion_rule: self.expansion_rule,
            agent_type: self.agent_type,
        }
    }

    pub fn with_scenario(mut self, scenario: Scenario) -> Self {
        self.peer_rule = scenario.peer_rule;
        self.expansion_rule = scenario.expansion_rule;
        self.agent_type = scenario.agent_type;
        self
    }

    pub fn decoding(&self, profile: DecodingProfile) -> &DecodingParams {
        match profile {
            DecodingProfile::Narrow => &self.narrow,
            DecodingProfile::Creative => &self.creative,
        }
    }

    pub fn memory_loss(&self) -> usize {
        if self.agent_type.is_generating() {
            self.memory_loss_active
        } else {
            self.memory_loss_passive
        }
    }

    /// Steps needed to fill a perspective under the seeding mode.
    pub fn seeding_steps(&self) -> usize {
        match self.seeding {
            SeedingMode::Ramp { per_step } => self.perspective_capacity.div_ceil(per_step.max(1)),
            SeedingMode::Full => 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("n_agents", self.n_agents),
            ("perspective_capacity", self.perspective_capacity),
            ("t_max", self.t_max),
            ("burn_in", self.burn_in),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(ConfigError::new(field, "must be positive"));
            }
        }
        let unit = [
            ("relevance_deprecation", self.relevance_deprecation),
            ("contribution_probability", self.contribution_probability),
            ("explication_fraction", self.explication_fraction),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::new(field, "must be in [0, 1]"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(ConfigError::new("epsilon", "must be in (0, 1]"));
        }
        if !(self.homophily_exponent >= 0.0 && self.homophily_exponent.is_finite()) {
            return Err(ConfigError::new("homophily_exponent", "must be a finite value >= 0"));
        }
        if !self.confirmation_bias_exponent.is_finite() {
            return Err(ConfigError::new("confirmation_bias_exponent", "must be finite"));
        }
        for (field, ml) in [
            ("memory_loss_passive", self.memory_loss_passive),
            ("memory_loss_active", self.memory_loss_active),
        ] {
            if ml == 0 || ml > self.perspective_capacity {
                return Err(ConfigError::new(field, "must be in 1..=perspective_capacity"));
            }
        }
        if let SeedingMode::Ramp { per_step } = self.seeding {
            if per_step == 0 {
                return Err(ConfigError::new("seeding.per_step", "must be positive"));
            }
        }
        if self.seeding_steps() > self.burn_in {
            return Err(ConfigError::new(
                "burn_in",
                format!(
                    "seeding needs {} steps to reach capacity, burn_in is {}",
                    self.seeding_steps(),
                    self.burn_in
                ),
            ));
        }
        self.narrow.validate().map_err(|e| e.within("narrow"))?;
        self.creative.validate().map_err(|e| e.within("creative"))?;
        Ok(())
    }
}

/// Label used in reports for a config; alias for `scenario().to_string()`.
pub fn scenario_label(config: &SimulationConfig) -> String {
    format!("{}", config.scenario())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec::Vec;

    #[test]
    fn defaults_match_parameter_table() {
        let c = SimulationConfig::default();
        assert_eq!((c.n_agents, c.perspective_capacity, c.t_max), (20, 8, 150));
        assert_eq!(c.relevance_deprecation, 0.9);
        assert_eq!((c.memory_loss_passive, c.memory_loss_active), (1, 2));
        assert_eq!((c.confirmation_bias_exponent, c.homophily_exponent), (50.0, 50.0));
        assert_eq!(c.epsilon, 0.04);
        assert_eq!(c.contribution_probability, 0.2);
        assert_eq!((c.narrow.temperature, c.narrow.top_p), (1.0, 0.5));
        assert_eq!((c.creative.temperature, c.creative.top_p), (1.4, 0.95));
        assert_eq!((c.narrow.num_beams, c.narrow.repetition_penalty, c.narrow.sampling), (5, 1.2, true));
        c.validate().unwrap();
    }

    #[test]
    fn grid_has_twelve_distinct_labels() {
        let labels: Vec<_> = Scenario::grid().map(|s| s.to_string()).collect();
        assert_eq!(labels.len(), 12);
        assert!(labels.contains(&"homophily-listening".to_string()));
        assert!(labels.contains(&"bounded_confidence-gen_creat".to_string()));
        for l in &labels {
            assert_eq!(&l.parse::<Scenario>().unwrap().to_string(), l);
        }
    }

    #[test]
    fn validation_names_field() {
        let c = SimulationConfig { epsilon: 0.0, ..Default::default() };
        assert_eq!(c.validate().unwrap_err().field, "epsilon");
        let mut c = SimulationConfig::default();
        c.creative.top_p = 1.5;
        assert_eq!(c.validate().unwrap_err().field, "creative.top_p");
        let c = SimulationConfig { burn_in: 3, ..Default::default() };
        assert_eq!(c.validate().unwrap_err().field, "burn_in");
    }
}

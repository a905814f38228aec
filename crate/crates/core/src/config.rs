//! Run configuration: TOML files with `[run]`, `[agent]` and `[clustering]` sections.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::approximator::{LossKind, OptimizerKind};
use crate::envs::EnvId;
use crate::error::{Error, Result};

/// Learning algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Nstep,
    Double,
    Average,
    Elastic,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Nstep => "nstep",
            AgentKind::Double => "double",
            AgentKind::Average => "average",
            AgentKind::Elastic => "elastic",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(AgentKind::Dqn),
            "nstep" => Ok(AgentKind::Nstep),
            "double" => Ok(AgentKind::Double),
            "average" => Ok(AgentKind::Average),
            "elastic" => Ok(AgentKind::Elastic),
            other => Err(Error::Config(format!("unknown agent_id `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonDecay {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

/// Which vectors the elastic clusterer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    /// Hidden-layer activations of the primary network.
    #[default]
    Hidden,
    /// Raw observations.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub env: EnvId,
    pub agent: AgentKind,
    pub total_steps: u64,
    /// Seed list in the `--seeds` syntax, e.g. `"0..29"`.
    #[serde(default = "default_seeds")]
    pub seeds: String,
    #[serde(default = "default_final_window")]
    pub final_window_epochs: usize,
    #[serde(default = "default_probe_size")]
    pub probe_size: usize,
    #[serde(default = "default_q_interval")]
    pub q_sample_interval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub target_update_interval: u64,
    pub replay_capacity: usize,
    pub initial_replay_size: usize,
    pub train_frequency: u64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    #[serde(default)]
    pub epsilon_decay: EpsilonDecay,
    /// Defaults to a tenth of `total_steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_decay_steps: Option<u64>,
    pub batch_size: usize,
    pub hidden_units: usize,
    #[serde(default = "default_n_step")]
    pub n_step: u32,
    #[serde(default = "default_snapshots")]
    pub averaged_snapshots: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub clamp_actions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Spatial-index tuning knob; neighbour search is exhaustive, so it has no effect on results.
    #[serde(default = "default_leaf_size")]
    pub leaf_size: usize,
    #[serde(default = "default_min_cluster_size")]
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples: Option<usize>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_bank_capacity")]
    pub state_bank_capacity: usize,
    #[serde(default = "default_bank_sample")]
    pub state_bank_sample_size: usize,
    #[serde(default = "default_max_components")]
    pub max_components: usize,
    #[serde(default = "default_refit")]
    pub cluster_refit_interval: usize,
    #[serde(default)]
    pub features: FeatureSpace,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            leaf_size: default_leaf_size(),
            min_cluster_size: default_min_cluster_size(),
            min_samples: None,
            metric: Metric::Euclidean,
            state_bank_capacity: default_bank_capacity(),
            state_bank_sample_size: default_bank_sample(),
            max_components: default_max_components(),
            cluster_refit_interval: default_refit(),
            features: FeatureSpace::Hidden,
        }
    }
}

impl ClusteringConfig {
    pub fn resolved_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub agent: AgentConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
}

fn default_seeds() -> String {
    "0..29".into()
}
fn default_final_window() -> usize {
    10
}
fn default_probe_size() -> usize {
    256
}
fn default_q_interval() -> u64 {
    1000
}
fn default_n_step() -> u32 {
    1
}
fn default_snapshots() -> usize {
    2
}
fn default_alpha() -> f64 {
    1.0
}
fn default_leaf_size() -> usize {
    40
}
fn default_min_cluster_size() -> usize {
    5
}
fn default_bank_capacity() -> usize {
    10_000
}
fn default_bank_sample() -> usize {
    1000
}
fn default_max_components() -> usize {
    30
}
fn default_refit() -> usize {
    1
}

/// Keys accepted by each section, for resolving bare `key=value` overrides.
pub const RUN_KEYS: &[&str] = &[
    "env",
    "agent",
    "total_steps",
    "seeds",
    "final_window_epochs",
    "probe_size",
    "q_sample_interval",
];
pub const AGENT_KEYS: &[&str] = &[
    "learning_rate",
    "target_update_interval",
    "replay_capacity",
    "initial_replay_size",
    "train_frequency",
    "gamma",
    "epsilon_start",
    "epsilon_min",
    "epsilon_decay",
    "epsilon_decay_steps",
    "batch_size",
    "hidden_units",
    "n_step",
    "averaged_snapshots",
    "optimizer",
    "loss",
    "clamp_actions",
];
pub const CLUSTERING_KEYS: &[&str] = &[
    "alpha",
    "leaf_size",
    "min_cluster_size",
    "min_samples",
    "metric",
    "state_bank_capacity",
    "state_bank_sample_size",
    "max_components",
    "cluster_refit_interval",
    "features",
];

/// Keys whose values are strings, so `seeds=4` stays the string `"4"`.
const STRING_KEYS: &[&str] = &["env", "agent", "seeds", "epsilon_decay", "optimizer", "loss", "metric", "features"];

const SHIPPED: &[(&str, &str)] = &[
    ("cartpole_dqn", include_str!("../../../configs/cartpole_dqn.toml")),
    ("cartpole_double", include_str!("../../../configs/cartpole_double.toml")),
    ("cartpole_average", include_str!("../../../configs/cartpole_average.toml")),
    ("cartpole_nstep2", include_str!("../../../configs/cartpole_nstep2.toml")),
    ("cartpole_nstep4", include_str!("../../../configs/cartpole_nstep4.toml")),
    ("cartpole_nstep6", include_str!("../../../configs/cartpole_nstep6.toml")),
    ("cartpole_nstep8", include_str!("../../../configs/cartpole_nstep8.toml")),
    ("cartpole_elastic", include_str!("../../../configs/cartpole_elastic.toml")),
    ("acrobot_dqn", include_str!("../../../configs/acrobot_dqn.toml")),
    ("acrobot_double", include_str!("../../../configs/acrobot_double.toml")),
    ("acrobot_average", include_str!("../../../configs/acrobot_average.toml")),
    ("acrobot_nstep2", include_str!("../../../configs/acrobot_nstep2.toml")),
    ("acrobot_nstep4", include_str!("../../../configs/acrobot_nstep4.toml")),
    ("acrobot_nstep6", include_str!("../../../configs/acrobot_nstep6.toml")),
    ("acrobot_nstep8", include_str!("../../../configs/acrobot_nstep8.toml")),
    ("acrobot_elastic", include_str!("../../../configs/acrobot_elastic.toml")),
    ("mountain_car_dqn", include_str!("../../../configs/mountain_car_dqn.toml")),
    ("mountain_car_double", include_str!("../../../configs/mountain_car_double.toml")),
    ("mountain_car_average", include_str!("../../../configs/mountain_car_average.toml")),
    ("mountain_car_nstep2", include_str!("../../../configs/mountain_car_nstep2.toml")),
    ("mountain_car_nstep4", include_str!("../../../configs/mountain_car_nstep4.toml")),
    ("mountain_car_nstep6", include_str!("../../../configs/mountain_car_nstep6.toml")),
    ("mountain_car_nstep8", include_str!("../../../configs/mountain_car_nstep8.toml")),
    ("mountain_car_elastic", include_str!("../../../configs/mountain_car_elastic.toml")),
];

/// Names of the configurations compiled into the binary.
pub fn shipped_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// Source text of a shipped configuration.
pub fn shipped_source(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Loads a file path, or a shipped configuration by name when no such file exists.
    pub fn load(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            return Self::from_toml_str(&std::fs::read_to_string(path)?);
        }
        let stem = name_or_path.trim_end_matches(".toml");
        match shipped_source(stem) {
            Some(src) => Self::from_toml_str(src),
            None => Err(Error::Config(format!("no config file or shipped config named `{name_or_path}`"))),
        }
    }

    /// Applies `key=value` or `section.key=value` overrides, then revalidates.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            let ov = ov.as_ref();
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let (section, field) = match key.split_once('.') {
                Some((s, f)) => (s.to_string(), f.to_string()),
                None => (section_of(key)?.to_string(), key.to_string()),
            };
            let allowed = match section.as_str() {
                "run" => RUN_KEYS,
                "agent" => AGENT_KEYS,
                "clustering" => CLUSTERING_KEYS,
                other => return Err(Error::Config(format!("unknown section `{other}`"))),
            };
            if !allowed.contains(&field.as_str()) {
                return Err(Error::Config(format!("unknown key `{section}.{field}`")));
            }
            let value = if STRING_KEYS.contains(&field.as_str()) {
                toml::Value::String(raw.trim_matches('"').to_string())
            } else {
                parse_value(raw)
            };
            doc.entry(section.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{section}` is not a table")))?
                .insert(field, value);
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Short algorithm label used in result tables, e.g. `nstep4`.
    pub fn label(&self) -> String {
        match self.run.agent {
            AgentKind::Nstep => format!("nstep{}", self.agent.n_step),
            k => k.name().to_string(),
        }
    }

    pub fn epoch_length(&self) -> u64 {
        self.run.total_steps / 100
    }

    pub fn epsilon_decay_steps(&self) -> u64 {
        self.agent.epsilon_decay_steps.unwrap_or(self.run.total_steps / 10)
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        parse_seeds(&self.run.seeds)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let r = &self.run;
        let a = &self.agent;
        let c = &self.clustering;
        if r.total_steps == 0 || r.total_steps % 100 != 0 {
            return bad(format!("total_steps = {} must be a positive multiple of 100", r.total_steps));
        }
        if r.final_window_epochs == 0 || r.final_window_epochs > 100 {
            return bad("final_window_epochs must be in 1..=100".into());
        }
        if r.probe_size == 0 || r.q_sample_interval == 0 {
            return bad("probe_size and q_sample_interval must be positive".into());
        }
        parse_seeds(&r.seeds)?;
        if !(a.gamma > 0.0 && a.gamma < 1.0) {
            return bad(format!("gamma = {} must lie in (0, 1)", a.gamma));
        }
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        if !(0.0..=1.0).contains(&a.epsilon_min) || !(0.0..=1.0).contains(&a.epsilon_start) || a.epsilon_min > a.epsilon_start {
            return bad("need 0 <= epsilon_min <= epsilon_start <= 1".into());
        }
        if a.batch_size == 0 || a.hidden_units == 0 || a.target_update_interval == 0 || a.train_frequency == 0 {
            return bad("batch_size, hidden_units, target_update_interval and train_frequency must be positive".into());
        }
        if a.initial_replay_size < a.batch_size || a.replay_capacity < a.initial_replay_size {
            return bad("need batch_size <= initial_replay_size <= replay_capacity".into());
        }
        if a.n_step == 0 {
            return bad("n_step must be at least 1".into());
        }
        if r.agent != AgentKind::Nstep && a.n_step != 1 {
            return bad(format!("n_step = {} is only meaningful for the nstep agent", a.n_step));
        }
        if a.averaged_snapshots == 0 {
            return bad("averaged_snapshots must be at least 1".into());
        }
        if c.min_cluster_size < 2 || c.resolved_min_samples() == 0 {
            return bad("need min_cluster_size >= 2 and min_samples >= 1".into());
        }
        if !(c.alpha > 0.0 && c.alpha.is_finite()) {
            return bad("alpha must be positive".into());
        }
        if c.state_bank_capacity == 0 || c.state_bank_sample_size == 0 || c.max_components == 0 || c.cluster_refit_interval == 0 || c.leaf_size == 0 {
            return bad("clustering sizes and intervals must be positive".into());
        }
        Ok(())
    }
}

fn section_of(key: &str) -> Result<&'static str> {
    let hits: Vec<&'static str> = [("run", RUN_KEYS), ("agent", AGENT_KEYS), ("clustering", CLUSTERING_KEYS)]
        .iter()
        .filter(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
        .collect();
    match hits.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Config(format!("unknown config key `{key}`"))),
        _ => Err(Error::Config(format!("ambiguous key `{key}`; qualify it with a section"))),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parses seed lists: `7`, `0..29` (inclusive), `1,4,9` or mixes like `0..4,10`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed `{s}` in `{spec}`")))
        };
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
                if lo > hi {
                    return Err(Error::Config(format!("empty seed range `{part}`")));
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    Ok(out)
}

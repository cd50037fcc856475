//! Run configuration files (TOML). Every section is optional except
//! `[scenario]` and the top-level `seed`; unset fields keep the defaults of
//! the scenario's mode. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::sweep::{ScenarioSource, SweepSpec};
use crate::engine::{Responsibility, SimConfig};
use crate::learning::persistence::{hex, Mode};
use crate::learning::LearnParams;
use crate::levelk::SwitchRule;
use crate::reward::{RewardWeights2D, RewardWeights3D};
use crate::saa::SaaLogic;
use crate::units::nm;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub decision_period_manned_s: Option<f64>,
    pub decision_period_uas_s: Option<f64>,
    pub dt_int_s: Option<f64>,
    pub pilot_distance_horizon_nm: Option<f64>,
    pub pilot_time_window_s: Option<f64>,
    pub max_time_s: Option<f64>,
    pub responsibility: Option<Responsibility>,
    pub switch_rule: Option<SwitchRule>,
    pub observation_window_s: Option<f64>,
    pub switch_projection_s: Option<f64>,
    pub stagger_decisions: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaaSection {
    pub logic: Option<SaaLogic>,
    pub miss_distance_nm: Option<f64>,
    pub time_horizon_s: Option<f64>,
    pub distance_horizon_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSection {
    pub planar: Option<RewardWeights2D>,
    pub spatial: Option<RewardWeights3D>,
    /// Rescales the planar safety weights to this safety/performance ratio.
    pub safety_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSource,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub saa: SaaSection,
    #[serde(default)]
    pub reward: RewardSection,
    /// Overrides of the learner settings; merged onto the mode defaults.
    #[serde(default)]
    pub learning: toml::Table,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

/// A configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub mode: Mode,
    pub scenario: ScenarioSource,
    pub sim: SimConfig,
    pub learning: LearnParams,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mode = self.scenario.mode();
        let mut sim = SimConfig::for_mode(mode);
        let s = &self.sim;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut sim.decision_period_manned, s.decision_period_manned_s);
        set(&mut sim.decision_period_uas, s.decision_period_uas_s);
        set(&mut sim.dt_int, s.dt_int_s);
        set(&mut sim.pilot_distance_horizon, s.pilot_distance_horizon_nm.map(nm));
        set(&mut sim.pilot_time_window, s.pilot_time_window_s);
        set(&mut sim.max_time, s.max_time_s);
        set(&mut sim.observation_window, s.observation_window_s);
        set(&mut sim.switch_projection, s.switch_projection_s);
        if let Some(r) = s.responsibility {
            sim.responsibility = r;
        }
        if let Some(r) = s.switch_rule {
            sim.switch_rule = r;
        }
        if let Some(b) = s.stagger_decisions {
            sim.stagger_decisions = b;
        }
        let a = &self.saa;
        if let Some(l) = a.logic {
            sim.saa.logic = l;
        }
        set(&mut sim.saa.miss_distance, a.miss_distance_nm.map(nm));
        set(&mut sim.saa.time_horizon, a.time_horizon_s);
        set(&mut sim.saa.distance_horizon, a.distance_horizon_nm.map(nm));
        if let Some(w) = self.reward.planar {
            sim.weights_2d = w;
        }
        if let Some(w) = self.reward.spatial {
            sim.weights_3d = w;
        }
        if let Some(r) = self.reward.safety_ratio {
            sim.weights_2d = sim.weights_2d.with_safety_ratio(r).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        sim.seed = self.seed;
        sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let learning = merge_learning(mode, &self.learning)?;
        learning.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Resolved { seed: self.seed, mode, scenario: self.scenario.clone(), sim, learning, sweep: self.sweep.clone() })
    }
}

fn merge_learning(mode: Mode, overrides: &toml::Table) -> Result<LearnParams, ConfigError> {
    let base = toml::Table::try_from(LearnParams::for_mode(mode)).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut merged = base;
    for (k, v) in overrides {
        if !merged.contains_key(k) {
            return Err(ConfigError::Parse(format!("unknown field `{k}` in [learning]")));
        }
        merged.insert(k.clone(), v.clone());
    }
    merged.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(format!("[learning]: {e}")))
}

fn sha256_json<T: Serialize>(v: &T) -> [u8; 32] {
    let json = serde_json::to_vec(v).expect("configuration serializes");
    Sha256::digest(&json).into()
}

impl Resolved {
    /// Hash of the whole resolved configuration.
    pub fn config_hash(&self) -> [u8; 32] {
        sha256_json(self)
    }

    pub fn config_hash_hex(&self) -> String {
        hex(&self.config_hash())
    }

    /// Hash of everything that shapes a trained model: seed, mode, learner
    /// settings and the simulation settings the trainee flies under. SAA,
    /// responsibility and run length do not enter training.
    pub fn training_hash(&self) -> [u8; 32] {
        training_hash(self.seed, self.mode, &self.sim, &self.learning)
    }
}

pub fn training_hash(seed: u64, mode: Mode, sim: &SimConfig, learning: &LearnParams) -> [u8; 32] {
    let mut sim = *sim;
    let defaults = SimConfig::for_mode(mode);
    sim.saa = defaults.saa;
    sim.responsibility = defaults.responsibility;
    sim.max_time = defaults.max_time;
    sim.seed = 0;
    match mode {
        Mode::Planar => sim.weights_3d = defaults.weights_3d,
        Mode::Spatial => sim.weights_2d = defaults.weights_2d,
    }
    sha256_json(&(seed, mode, sim, learning))
}

/// Hex sha256 of any serializable settings, for output headers.
pub fn json_hash_hex<T: Serialize>(v: &T) -> String {
    hex(&sha256_json(v))
}

/// Comment header written at the top of every output file.
pub fn output_header(config_hash: &str, seed: u64) -> String {
    format!("# airsim {} config_hash={config_hash} seed={seed}\n", env!("CARGO_PKG_VERSION"))
}

//! Level-k pilot hierarchy: the level-0 rule, trained level-1/level-2
//! models, the dynamic level switch, and training of one level against the
//! level below it.

pub mod store;
mod training;

pub use training::{
    train_level, EncounterTemplate, PlanarEncounterEnv, SpatialEncounterEnv, TrainedLevel, TrainingError, TrainingPlan,
};

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AircraftState, PilotAction};
use crate::learning::mlp::Mlp;
use crate::learning::persistence::{Mode, PolicyArtifact, PolicyData};
use crate::learning::tabular::TabularPolicy;
use crate::learning::greedy_action;
use crate::perception::{to_network_input, Observation2D, Observation3D};

pub const MAX_LEVEL: u8 = 2;

/// The non-strategic pilot keeps flying the initial heading and pitch.
pub fn level0_action(_state: &AircraftState) -> PilotAction {
    PilotAction::Straight
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PilotPolicy {
    Level0,
    Learned {
        level: u8,
        dynamic: bool,
        effective_level: u8,
    },
    /// Decisions supplied by the caller at run time (used by training).
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LevelError {
    #[error("level {0} is not available: the hierarchy stops at level 2")]
    Unsupported(u8),
}

impl PilotPolicy {
    pub fn learned(level: u8, dynamic: bool) -> Result<Self, LevelError> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(LevelError::Unsupported(level));
        }
        Ok(PilotPolicy::Learned { level, dynamic, effective_level: level })
    }

    /// Level whose model currently drives the decisions.
    pub fn effective_level(&self) -> Option<u8> {
        match self {
            PilotPolicy::Level0 => Some(0),
            PilotPolicy::Learned { effective_level, .. } => Some(*effective_level),
            PilotPolicy::External => None,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, PilotPolicy::Learned { dynamic: true, .. })
    }

    fn toggle(&mut self) {
        if let PilotPolicy::Learned { effective_level, .. } = self {
            *effective_level = if *effective_level == 1 { 2 } else { 1 };
        }
    }
}

/// Observation handed to a pilot model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Percept {
    Planar(Observation2D),
    Spatial(Observation3D),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Tabular(TabularPolicy),
    Network(Mlp),
}

impl TrainedModel {
    pub fn mode(&self) -> Mode {
        match self {
            TrainedModel::Tabular(_) => Mode::Planar,
            TrainedModel::Network(_) => Mode::Spatial,
        }
    }

    /// Greedy action. Ties prefer Straight, then the lowest action code.
    pub fn act(&self, percept: &Percept) -> PilotAction {
        match (self, percept) {
            (TrainedModel::Tabular(p), Percept::Planar(o)) => {
                let a = p.greedy(o.index(), PilotAction::Straight.code() as usize);
                PilotAction::PLANAR[a]
            }
            (TrainedModel::Network(net), Percept::Spatial(o)) => greedy_action(&q_values(net, o), &PilotAction::ALL),
            _ => panic!("pilot model and observation disagree on the mode"),
        }
    }

    pub fn into_data(self) -> PolicyData {
        match self {
            TrainedModel::Tabular(p) => PolicyData::Tabular(p),
            TrainedModel::Network(n) => PolicyData::Network(n),
        }
    }

    pub fn from_artifact(a: PolicyArtifact) -> Self {
        match a.data {
            PolicyData::Tabular(p) => TrainedModel::Tabular(p),
            PolicyData::Network(n) => TrainedModel::Network(n),
        }
    }
}

/// Q-values of all five actions for a spatial observation.
pub fn q_values(net: &Mlp, o: &Observation3D) -> [f64; 5] {
    PilotAction::ALL.map(|a| net.forward_unchecked(&to_network_input(o, a)))
}

/// The shared level-1 and level-2 models deployed in a simulation.
#[derive(Debug, Clone, Default)]
pub struct PolicySet {
    pub level1: Option<Arc<TrainedModel>>,
    pub level2: Option<Arc<TrainedModel>>,
}

impl PolicySet {
    pub fn new(level1: Option<TrainedModel>, level2: Option<TrainedModel>) -> Self {
        Self { level1: level1.map(Arc::new), level2: level2.map(Arc::new) }
    }

    pub fn get(&self, level: u8) -> Option<&TrainedModel> {
        match level {
            1 => self.level1.as_deref(),
            2 => self.level2.as_deref(),
            _ => None,
        }
    }
}

/// Crowded-scenario mix: 10% level-0, 60% level-1, 30% level-2, placed by
/// a seeded shuffle.
pub fn assign_crowded_levels(n: usize, seed: u64, dynamic: bool) -> Vec<PilotPolicy> {
    let n0 = (n as f64 * 0.1).round() as usize;
    let n1 = ((n as f64 * 0.6).round() as usize).min(n - n0);
    let mut out: Vec<PilotPolicy> = (0..n)
        .map(|i| {
            if i < n0 {
                PilotPolicy::Level0
            } else if i < n0 + n1 {
                PilotPolicy::Learned { level: 1, dynamic, effective_level: 1 }
            } else {
                PilotPolicy::Learned { level: 2, dynamic, effective_level: 2 }
            }
        })
        .collect();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchRule {
    /// One agent of the pair, drawn uniformly, switches.
    #[default]
    RandomOne,
    /// Each agent switches independently with probability one half.
    Independent,
}

/// Applies the dynamic level switch to a pair in a persisting conflict.
/// `done` marks agents that already switched during this encounter; they
/// never switch again. Returns which agents switched.
pub fn dynamic_level_update<R: Rng>(
    pair: [&mut PilotPolicy; 2],
    done: [bool; 2],
    conflict: bool,
    rule: SwitchRule,
    rng: &mut R,
) -> [bool; 2] {
    let eligible = [0, 1].map(|i| pair[i].is_dynamic() && !done[i]);
    if !conflict || !(eligible[0] || eligible[1]) {
        return [false, false];
    }
    let mut switched = [false, false];
    match rule {
        SwitchRule::RandomOne => {
            let pick = if eligible[0] && eligible[1] { rng.gen_range(0..2) } else if eligible[0] { 0 } else { 1 };
            switched[pick] = true;
        }
        SwitchRule::Independent => {
            for i in 0..2 {
                switched[i] = rng.gen_bool(0.5) && eligible[i];
            }
        }
    }
    let [a, b] = pair;
    if switched[0] {
        a.toggle();
    }
    if switched[1] {
        b.toggle();
    }
    switched
}

//! Training one level: the trainee flies generated encounters against an
//! opponent fixed at the level below, and the matching learner (tabular in
//! 2D, NFQ in 3D) improves its policy from the recorded decisions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{q_values, LevelError, Percept, PilotPolicy, PolicySet, TrainedModel, MAX_LEVEL};
use crate::dynamics::{AircraftState, PilotAction};
use crate::engine::scenario::{generate_single_encounter, EncounterGeometry};
use crate::engine::{encounter_duration, EngineError, Responsibility, RunOptions, SimConfig, World};
use crate::learning::mlp::{Mlp, DEFAULT_SIZES};
use crate::learning::nfq::{train_nfq, NfqEnvironment, Transition};
use crate::learning::persistence::Mode;
use crate::learning::tabular::{train_tabular, EpisodeSource, Step, TabularPolicy};
use crate::learning::{derive_seed, epsilon_greedy, LearnParams, LearnParamsError};
use crate::perception::{to_network_input, TrafficView, PLANAR_ACTIONS, STATE_COUNT_2D};
use crate::reward::{reward_2d, reward_3d, snapshot, SnapshotInput};

/// The encounters a trainee is exposed to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncounterTemplate {
    pub mode: Mode,
    #[serde(default)]
    pub geometry: EncounterGeometry,
    /// Fixed approach angle, degrees; drawn from [45, 180] when absent.
    #[serde(default)]
    pub approach_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub target_level: u8,
    pub template: EncounterTemplate,
    pub params: LearnParams,
    /// Pilot horizons, decision period and reward weights of the episodes.
    pub sim: SimConfig,
    pub seed: u64,
}

impl TrainingPlan {
    pub fn opponent_level(&self) -> u8 {
        self.target_level.saturating_sub(1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error("level-{level} {} policy must be trained first", mode.tag())]
    MissingPrerequisitePolicy { level: u8, mode: Mode },
    #[error(transparent)]
    Params(#[from] LearnParamsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct TrainedLevel {
    pub level: u8,
    pub model: TrainedModel,
    pub converged: bool,
    pub iterations: usize,
    /// Mean episode return per iteration.
    pub curve: Vec<f64>,
}

impl TrainedLevel {
    pub fn pilot(&self, dynamic: bool) -> PilotPolicy {
        PilotPolicy::Learned { level: self.level, dynamic, effective_level: self.level }
    }
}

/// A decision of the trainee and the reward it earned over the following
/// decision period.
struct Decision {
    percept: Percept,
    action: PilotAction,
    reward: f64,
    next: Option<Percept>,
}

struct EncounterEnv<'a> {
    plan: TrainingPlan,
    opponent: PilotPolicy,
    policies: &'a PolicySet,
}

impl<'a> EncounterEnv<'a> {
    fn new(plan: &TrainingPlan, prerequisites: &'a PolicySet) -> Result<Self, TrainingError> {
        if !(1..=MAX_LEVEL).contains(&plan.target_level) {
            return Err(LevelError::Unsupported(plan.target_level).into());
        }
        plan.params.validate()?;
        plan.sim.validate()?;
        let opponent = match plan.opponent_level() {
            0 => PilotPolicy::Level0,
            k => {
                match prerequisites.get(k) {
                    Some(m) if m.mode() == plan.template.mode => {}
                    _ => return Err(TrainingError::MissingPrerequisitePolicy { level: k, mode: plan.template.mode }),
                }
                PilotPolicy::Learned { level: k, dynamic: false, effective_level: k }
            }
        };
        Ok(Self { plan: plan.clone(), opponent, policies: prerequisites })
    }

    fn reward(&self, before: &AircraftState, after: &AircraftState, traffic: &[TrafficView], action: PilotAction, period: f64) -> f64 {
        let mode = self.plan.template.mode;
        let cfg = &self.plan.sim;
        let s = snapshot(&SnapshotInput {
            before,
            after,
            traffic,
            action,
            decision_period: period,
            regions: SimConfig::reward_regions(mode),
            observation: cfg.observation_region(mode),
            spatial: mode == Mode::Spatial,
        });
        match mode {
            Mode::Planar => reward_2d(&s, &cfg.weights_2d),
            Mode::Spatial => reward_3d(&s, &cfg.weights_3d),
        }
    }

    /// Flies one encounter; `choose` picks the trainee's actions.
    fn episode(&self, seed: u64, choose: &mut dyn FnMut(&Percept, &mut ChaCha8Rng) -> PilotAction) -> Vec<Decision> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7EA1));
        let t = &self.plan.template;
        let angle = t.approach_deg.unwrap_or_else(|| rng.gen_range(45.0..=180.0));
        let sc = generate_single_encounter(t.mode, angle, [PilotPolicy::External, self.opponent], self.plan.sim.pilot_distance_horizon, &t.geometry, seed);
        let cfg = SimConfig {
            seed,
            max_time: encounter_duration(&sc),
            responsibility: Responsibility::MannedOnly,
            ..self.plan.sim
        };
        let mut world = World::new(&sc, &cfg, self.policies, RunOptions::default()).expect("training episodes are valid by construction");
        let mut out: Vec<Decision> = Vec::new();
        let mut pending: Option<(Percept, PilotAction, AircraftState, f64)> = None;
        while !world.is_done() && world.manned_active(0) {
            world.step(&mut |ctx| {
                if let Some((percept, action, before, t0)) = pending.take() {
                    let reward = self.reward(&before, ctx.own, ctx.traffic, action, ctx.t - t0);
                    out.push(Decision { percept, action, reward, next: Some(ctx.percept) });
                }
                let a = choose(&ctx.percept, &mut rng);
                pending = Some((ctx.percept, a, *ctx.own, ctx.t));
                a
            });
        }
        if let Some((percept, action, before, t0)) = pending {
            let period = (world.time() - t0).max(cfg.decision_period_uas);
            let reward = self.reward(&before, world.manned_state(0), &world.traffic_for(0), action, period);
            out.push(Decision { percept, action, reward, next: None });
        }
        out
    }
}

/// 2D episodes for the tabular learner.
pub struct PlanarEncounterEnv<'a>(EncounterEnv<'a>);

impl<'a> PlanarEncounterEnv<'a> {
    pub fn new(plan: &TrainingPlan, prerequisites: &'a PolicySet) -> Result<Self, TrainingError> {
        Ok(Self(EncounterEnv::new(plan, prerequisites)?))
    }
}

impl EpisodeSource for PlanarEncounterEnv<'_> {
    fn rollout(&self, policy: &TabularPolicy, seed: u64) -> Vec<Step> {
        let mut choose = |p: &Percept, rng: &mut ChaCha8Rng| match p {
            Percept::Planar(o) => PilotAction::PLANAR[policy.sample(o.index(), rng)],
            Percept::Spatial(_) => unreachable!("planar environment"),
        };
        self.0
            .episode(seed, &mut choose)
            .into_iter()
            .map(|d| match d.percept {
                Percept::Planar(o) => Step { message: o.index() as u32, action: d.action.code(), reward: d.reward },
                Percept::Spatial(_) => unreachable!("planar environment"),
            })
            .collect()
    }
}

/// 3D episodes for NFQ.
pub struct SpatialEncounterEnv<'a>(EncounterEnv<'a>);

impl<'a> SpatialEncounterEnv<'a> {
    pub fn new(plan: &TrainingPlan, prerequisites: &'a PolicySet) -> Result<Self, TrainingError> {
        Ok(Self(EncounterEnv::new(plan, prerequisites)?))
    }
}

impl NfqEnvironment for SpatialEncounterEnv<'_> {
    fn rollout(&self, net: &Mlp, exploration: f64, seed: u64) -> (Vec<Transition>, f64) {
        let mut choose = |p: &Percept, rng: &mut ChaCha8Rng| match p {
            Percept::Spatial(o) => epsilon_greedy(&q_values(net, o), &PilotAction::ALL, exploration, rng),
            Percept::Planar(_) => unreachable!("spatial environment"),
        };
        let decisions = self.0.episode(seed, &mut choose);
        let total = decisions.iter().map(|d| d.reward).sum();
        let transitions = decisions
            .into_iter()
            .map(|d| {
                let Percept::Spatial(o) = d.percept else { unreachable!("spatial environment") };
                let next_inputs = match d.next {
                    Some(Percept::Spatial(n)) => PilotAction::ALL.iter().map(|a| to_network_input(&n, *a).to_vec()).collect(),
                    _ => Vec::new(),
                };
                Transition { input: to_network_input(&o, d.action).to_vec(), reward: d.reward, terminal: next_inputs.is_empty(), next_inputs }
            })
            .collect();
        (transitions, total)
    }
}

/// Trains `plan.target_level` against the level below it. Level 2 needs
/// the level-1 model of the same mode in `prerequisites`.
pub fn train_level(plan: &TrainingPlan, prerequisites: &PolicySet) -> Result<TrainedLevel, TrainingError> {
    let seed = derive_seed(plan.seed, plan.target_level as u64);
    match plan.template.mode {
        Mode::Planar => {
            let env = PlanarEncounterEnv::new(plan, prerequisites)?;
            let out = train_tabular(&env, STATE_COUNT_2D, PLANAR_ACTIONS, &plan.params, seed);
            Ok(TrainedLevel {
                level: plan.target_level,
                model: TrainedModel::Tabular(out.policy),
                converged: out.converged,
                iterations: out.iterations,
                curve: out.curve,
            })
        }
        Mode::Spatial => {
            let env = SpatialEncounterEnv::new(plan, prerequisites)?;
            // Level 2 starts from the level-1 network it is trained against.
            let init = match prerequisites.get(plan.target_level - 1) {
                Some(TrainedModel::Network(net)) => net.clone(),
                _ => Mlp::random(&DEFAULT_SIZES, derive_seed(seed, 0x1417)).expect("default network shape is valid"),
            };
            let out = train_nfq(&env, init, &plan.params, seed);
            Ok(TrainedLevel {
                level: plan.target_level,
                model: TrainedModel::Network(out.net),
                converged: out.converged,
                iterations: out.iterations,
                curve: out.curve,
            })
        }
    }
}

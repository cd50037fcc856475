//! The simulation loop. Every tick runs the same fixed sequence on a frozen
//! start-of-tick snapshot: manned perception and decisions, UAS sense and
//! avoid or waypoint guidance, dynamics, metrics, then the dynamic level
//! switch.

pub mod metrics;
pub mod scenario;
pub mod sweep;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_pilot_action, step_manned_with, step_uas, waypoint_guidance, AircraftState, PilotAction, UasState};
use crate::learning::derive_seed;
use crate::learning::persistence::Mode;
use crate::levelk::{dynamic_level_update, level0_action, Percept, PilotPolicy, PolicySet, SwitchRule};
use crate::perception::{encode_2d, encode_3d, enters_cylinder, ObservationGeometry2D, ObservationGeometry3D, TrafficView};
use crate::reward::{Region, RewardRegions, RewardWeights2D, RewardWeights3D};
use crate::saa::{closest_approach, detect_conflict, resolve, select_conflict, Kinematics, SaaConfig};
use crate::units::{nm, to_ft, to_nm, Vec3, DEG};

pub use metrics::{EncounterRecord, ScenarioMetrics};
pub use scenario::{Airspace, MannedSpec, Scenario, UasSpec};

/// Which side resolves conflicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responsibility {
    /// Pilots maneuver; the UAS only follows its waypoints.
    #[serde(alias = "manned")]
    MannedOnly,
    /// The UAS runs sense and avoid; every pilot flies straight.
    #[serde(alias = "uas")]
    UasOnly,
    Shared,
}

impl Responsibility {
    pub const ALL: [Responsibility; 3] = [Responsibility::MannedOnly, Responsibility::UasOnly, Responsibility::Shared];

    pub fn tag(self) -> &'static str {
        match self {
            Responsibility::MannedOnly => "manned",
            Responsibility::UasOnly => "uas",
            Responsibility::Shared => "shared",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub decision_period_manned: f64,
    /// Also the tick length, s.
    pub decision_period_uas: f64,
    pub dt_int: f64,
    /// Radius within which pilots observe traffic, m.
    pub pilot_distance_horizon: f64,
    /// Constant-velocity look-ahead of the pilot observation, s.
    pub pilot_time_window: f64,
    pub saa: SaaConfig,
    pub responsibility: Responsibility,
    pub weights_2d: RewardWeights2D,
    pub weights_3d: RewardWeights3D,
    pub max_time: f64,
    pub seed: u64,
    pub switch_rule: SwitchRule,
    /// Time two dynamic pilots must watch each other before a switch, s.
    pub observation_window: f64,
    /// Projection used by the switch conflict check, s.
    pub switch_projection: f64,
    pub stagger_decisions: bool,
}

impl SimConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let (period, horizon) = match mode {
            Mode::Planar => (20.0, nm(5.0)),
            Mode::Spatial => (5.0, nm(10.0)),
        };
        Self {
            decision_period_manned: period,
            decision_period_uas: 1.0,
            dt_int: crate::dynamics::DEFAULT_DT_INT,
            pilot_distance_horizon: horizon,
            pilot_time_window: 20.0,
            saa: SaaConfig::default(),
            responsibility: Responsibility::MannedOnly,
            weights_2d: RewardWeights2D::default(),
            weights_3d: RewardWeights3D::default(),
            max_time: 1800.0,
            seed: 0,
            switch_rule: SwitchRule::RandomOne,
            observation_window: 10.0,
            switch_projection: 60.0,
            stagger_decisions: true,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let multiple = |a: f64, b: f64| b > 0.0 && a > 0.0 && ((a / b) - (a / b).round()).abs() < 1e-9;
        if !multiple(self.decision_period_uas, self.dt_int) || !multiple(self.decision_period_manned, self.dt_int) {
            return Err(EngineError::Config("decision periods must be positive multiples of dt_int".into()));
        }
        if !multiple(self.decision_period_manned, self.decision_period_uas) {
            return Err(EngineError::Config("the manned decision period must be a multiple of the UAS period".into()));
        }
        if !(self.max_time > 0.0) || !(self.pilot_distance_horizon > 0.0) || !(self.pilot_time_window >= 0.0) {
            return Err(EngineError::Config("horizons and max_time must be positive".into()));
        }
        self.weights_2d.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        self.weights_3d.validate().map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn geometry_2d(&self) -> ObservationGeometry2D {
        ObservationGeometry2D { outer_radius: self.pilot_distance_horizon, lookahead: self.pilot_time_window, ..Default::default() }
    }

    pub fn geometry_3d(&self) -> ObservationGeometry3D {
        ObservationGeometry3D { distance_horizon: self.pilot_distance_horizon, lookahead: self.pilot_time_window, ..Default::default() }
    }

    pub fn reward_regions(mode: Mode) -> RewardRegions {
        match mode {
            Mode::Planar => RewardRegions::planar(),
            Mode::Spatial => RewardRegions::spatial(),
        }
    }

    /// Region in which the closing term of the reward looks for intruders.
    pub fn observation_region(&self, mode: Mode) -> Region {
        match mode {
            Mode::Planar => Region { radius: self.pilot_distance_horizon, half_height: f64::INFINITY },
            Mode::Spatial => Region { radius: self.pilot_distance_horizon, half_height: self.geometry_3d().vertical_half_height },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("no level-{level} {} policy loaded", mode.tag())]
    MissingPolicy { level: u8, mode: Mode },
    #[error("a {} policy cannot drive a {} scenario", policy.tag(), scenario.tag())]
    ModeMismatch { policy: Mode, scenario: Mode },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub log_trajectories: bool,
}

/// One trajectory-log line. Positions in nm and ft, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub theta: f64,
    pub action: Option<u8>,
    pub level: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: ScenarioMetrics,
    pub log: Vec<LogRecord>,
}

/// What an external pilot gets to see when a decision is due.
pub struct DecisionContext<'a> {
    pub agent: usize,
    pub id: &'a str,
    pub percept: Percept,
    pub own: &'a AircraftState,
    /// Every other active vehicle at the start of the tick.
    pub traffic: &'a [TrafficView],
    pub t: f64,
}

#[derive(Debug, Clone)]
struct Manned {
    id: String,
    state: AircraftState,
    pilot: PilotPolicy,
    last_action: PilotAction,
    phase: u64,
    active: bool,
    deviation: metrics::DeviationAccumulator,
}

#[derive(Debug, Clone)]
struct Uas {
    id: String,
    state: UasState,
    start: Vec3,
    active: bool,
    deviation: metrics::DeviationAccumulator,
    flight_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct SwitchWatch {
    since: Option<u64>,
    switched: bool,
}

pub struct World<'p> {
    mode: Mode,
    airspace: Airspace,
    cfg: SimConfig,
    policies: &'p PolicySet,
    manned: Vec<Manned>,
    uas: Vec<Uas>,
    tick: u64,
    period_ticks: u64,
    pairs: Vec<metrics::PairTracker>,
    watches: HashMap<(usize, usize), SwitchWatch>,
    level_switches: u32,
    uas_manned_violations: u32,
    manned_manned_violations: u32,
    log: Option<Vec<LogRecord>>,
}

fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

impl<'p> World<'p> {
    pub fn new(sc: &Scenario, cfg: &SimConfig, policies: &'p PolicySet, opts: RunOptions) -> Result<Self, EngineError> {
        cfg.validate()?;
        sc.validate()?;
        for level in [1u8, 2] {
            if let Some(m) = policies.get(level) {
                if m.mode() != sc.mode {
                    return Err(EngineError::ModeMismatch { policy: m.mode(), scenario: sc.mode });
                }
            }
        }
        for m in &sc.manned {
            if let PilotPolicy::Learned { level, dynamic, .. } = m.pilot {
                let needed: &[u8] = if dynamic { &[1, 2] } else { std::slice::from_ref(&level) };
                for &k in needed {
                    if policies.get(k).is_none() {
                        return Err(EngineError::MissingPolicy { level: k, mode: sc.mode });
                    }
                }
            }
        }
        let period_ticks = (cfg.decision_period_manned / cfg.decision_period_uas).round() as u64;
        let mut phase_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xDEC1_5104));
        let manned = sc
            .manned
            .iter()
            .map(|m| Manned {
                id: m.id.clone(),
                state: m.state,
                pilot: m.pilot,
                last_action: PilotAction::Straight,
                phase: if cfg.stagger_decisions { phase_rng.gen_range(0..period_ticks) } else { 0 },
                active: true,
                deviation: Default::default(),
            })
            .collect();
        let uas = sc
            .uas
            .iter()
            .map(|u| Uas {
                id: u.id.clone(),
                state: u.state(),
                start: u.position,
                active: true,
                deviation: Default::default(),
                flight_time: None,
            })
            .collect();
        let n = sc.manned.len() + sc.uas.len();
        Ok(Self {
            mode: sc.mode,
            airspace: sc.airspace,
            cfg: *cfg,
            policies,
            manned,
            uas,
            tick: 0,
            period_ticks,
            pairs: vec![Default::default(); n * n.saturating_sub(1) / 2],
            watches: HashMap::new(),
            level_switches: 0,
            uas_manned_violations: 0,
            manned_manned_violations: 0,
            log: opts.log_trajectories.then(Vec::new),
        })
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.decision_period_uas
    }

    pub fn is_done(&self) -> bool {
        self.time() >= self.cfg.max_time - 1e-9
            || !(self.manned.iter().any(|m| m.active) || self.uas.iter().any(|u| u.active))
    }

    pub fn manned_state(&self, i: usize) -> &AircraftState {
        &self.manned[i].state
    }

    pub fn manned_active(&self, i: usize) -> bool {
        self.manned[i].active
    }

    pub fn pilot(&self, i: usize) -> PilotPolicy {
        self.manned[i].pilot
    }

    fn n_manned(&self) -> usize {
        self.manned.len()
    }

    fn position_of(&self, v: usize) -> Vec3 {
        if v < self.n_manned() {
            self.manned[v].state.position
        } else {
            self.uas[v - self.n_manned()].state.position
        }
    }

    fn active(&self, v: usize) -> bool {
        if v < self.n_manned() {
            self.manned[v].active
        } else {
            self.uas[v - self.n_manned()].active
        }
    }

    /// ADS-B views of every active vehicle, ids are vehicle indices
    /// (manned first, then UAS).
    pub fn traffic_views(&self) -> Vec<TrafficView> {
        let m = self.manned.iter().enumerate().filter(|(_, a)| a.active).map(|(i, a)| TrafficView {
            id: i,
            position: a.state.position,
            velocity: a.state.velocity(),
        });
        let u = self.uas.iter().enumerate().filter(|(_, a)| a.active).map(|(i, a)| TrafficView {
            id: self.n_manned() + i,
            position: a.state.position,
            velocity: a.state.velocity,
        });
        m.chain(u).collect()
    }

    /// Views of everything except vehicle `v`.
    pub fn traffic_for(&self, v: usize) -> Vec<TrafficView> {
        self.traffic_views().into_iter().filter(|t| t.id != v).collect()
    }

    fn percept(&self, own: &AircraftState, traffic: &[TrafficView], prev: PilotAction) -> Percept {
        match self.mode {
            Mode::Planar => Percept::Planar(encode_2d(own, traffic, &self.cfg.geometry_2d(), self.cfg.decision_period_manned, prev)),
            Mode::Spatial => Percept::Spatial(encode_3d(own, traffic, &self.cfg.geometry_3d(), prev)),
        }
    }

    fn decide(&self, pilot: PilotPolicy, own: &AircraftState, percept: &Percept) -> PilotAction {
        if self.cfg.responsibility == Responsibility::UasOnly {
            return PilotAction::Straight;
        }
        match pilot {
            PilotPolicy::Level0 => level0_action(own),
            PilotPolicy::Learned { effective_level, .. } => match self.policies.get(effective_level) {
                Some(model) => model.act(percept),
                None => PilotAction::Straight,
            },
            PilotPolicy::External => PilotAction::Straight,
        }
    }

    fn log_tick(&mut self) {
        let t = self.time();
        let Some(log) = self.log.as_mut() else { return };
        for m in self.manned.iter().filter(|m| m.active) {
            let s = &m.state;
            log.push(LogRecord {
                t,
                id: m.id.clone(),
                x: to_nm(s.position.x),
                y: to_nm(s.position.y),
                z: to_ft(s.position.z),
                psi: s.heading / DEG,
                theta: s.pitch / DEG,
                action: Some(m.last_action.code()),
                level: m.pilot.effective_level(),
            });
        }
        for u in self.uas.iter().filter(|u| u.active) {
            let s = &u.state;
            log.push(LogRecord {
                t,
                id: u.id.clone(),
                x: to_nm(s.position.x),
                y: to_nm(s.position.y),
                z: to_ft(s.position.z),
                psi: s.velocity.bearing() / DEG,
                theta: s.velocity.z.atan2(s.velocity.horizontal_norm()) / DEG,
                action: None,
                level: None,
            });
        }
    }

    /// Advances one tick. `external` supplies the decisions of
    /// [`PilotPolicy::External`] pilots.
    pub fn step(&mut self, external: &mut dyn FnMut(&DecisionContext) -> PilotAction) {
        let t = self.time();
        self.log_tick();
        let views = self.traffic_views();
        let others = |v: usize| -> Vec<TrafficView> { views.iter().filter(|t| t.id != v).copied().collect() };

        // Manned decisions.
        let due: Vec<usize> = (0..self.n_manned())
            .filter(|&i| self.manned[i].active && (self.tick + self.manned[i].phase) % self.period_ticks == 0)
            .collect();
        let decisions: Vec<(PilotAction, Option<Percept>)> = crate::par::map_slice(&due, |&i| {
            let m = &self.manned[i];
            let traffic = others(i);
            let percept = self.percept(&m.state, &traffic, m.last_action);
            match m.pilot {
                PilotPolicy::External => (PilotAction::Straight, Some(percept)),
                p => (self.decide(p, &m.state, &percept), None),
            }
        });
        let mut actions = Vec::with_capacity(due.len());
        for (&i, (action, pending)) in due.iter().zip(decisions) {
            let action = match pending {
                Some(percept) => {
                    let traffic = others(i);
                    let m = &self.manned[i];
                    let ctx = DecisionContext { agent: i, id: &m.id, percept, own: &m.state, traffic: &traffic, t };
                    let a = external(&ctx);
                    if self.cfg.responsibility == Responsibility::UasOnly {
                        PilotAction::Straight
                    } else {
                        a
                    }
                }
                None => action,
            };
            actions.push((i, action));
        }
        for (i, action) in actions {
            let m = &mut self.manned[i];
            m.deviation.add(m.state.position, m.state.origin, m.state.destination);
            m.state = apply_pilot_action(&m.state, action);
            m.last_action = action;
        }

        // UAS guidance and sense and avoid.
        let n_m = self.n_manned();
        let saa_on = self.cfg.responsibility != Responsibility::MannedOnly;
        let planar = self.mode == Mode::Planar;
        for k in 0..self.uas.len() {
            if !self.uas[k].active {
                continue;
            }
            let u = &mut self.uas[k];
            if let Some((a, b)) = u.state.current_leg(u.start) {
                u.deviation.add(u.state.position, a, b);
            }
            let guidance = waypoint_guidance(&mut u.state);
            let cmd = match guidance {
                Ok(v) => v,
                Err(_) => {
                    u.active = false;
                    u.flight_time = Some(t);
                    continue;
                }
            };
            let own = Kinematics::new(u.state.position, u.state.velocity);
            let mut command = cmd;
            if saa_on {
                let preds: Vec<_> = views
                    .iter()
                    .filter(|v| v.id != n_m + k)
                    .filter_map(|v| detect_conflict(&own, &Kinematics::new(v.position, v.velocity), v.id, &self.cfg.saa))
                    .collect();
                if let Some(p) = select_conflict(&preds) {
                    let intr = views.iter().find(|v| v.id == p.intruder_id).expect("intruder is in the snapshot");
                    let cruise = self.uas[k].state.cruise_speed;
                    command = resolve(&own, &Kinematics::new(intr.position, intr.velocity), &self.cfg.saa, &p, cruise);
                    if planar {
                        command.z = 0.0;
                    }
                }
            }
            self.uas[k].state.commanded_velocity = command;
        }

        // Dynamics.
        let dt = self.cfg.decision_period_uas;
        let dt_int = self.cfg.dt_int;
        let stepped: Vec<AircraftState> =
            crate::par::map_slice(&self.manned, |m| if m.active { step_manned_with(&m.state, dt, dt_int) } else { m.state });
        for (m, s) in self.manned.iter_mut().zip(stepped) {
            m.state = s;
        }
        for u in self.uas.iter_mut().filter(|u| u.active) {
            u.state = step_uas(&u.state, dt);
        }
        self.tick += 1;

        // Metrics.
        let n = n_m + self.uas.len();
        for j in 1..n {
            if !self.active(j) {
                continue;
            }
            let pj = self.position_of(j);
            for i in 0..j {
                if !self.active(i) {
                    continue;
                }
                let pi = self.position_of(i);
                let (opened, _) = self.pairs[pair_index(i, j)].observe(pi, pj, planar);
                if opened {
                    match (i < n_m, j < n_m) {
                        (true, true) => self.manned_manned_violations += 1,
                        (true, false) | (false, true) => self.uas_manned_violations += 1,
                        _ => {}
                    }
                }
            }
        }
        let air = self.airspace;
        for m in self.manned.iter_mut().filter(|m| m.active) {
            let arrived = (m.state.destination - m.state.position).horizontal_norm() <= crate::dynamics::WAYPOINT_CAPTURE_RADIUS;
            if arrived || !air.contains_horizontally(m.state.position) {
                m.active = false;
            }
        }
        for u in self.uas.iter_mut().filter(|u| u.active) {
            if !air.contains_horizontally(u.state.position) {
                u.active = false;
            }
        }

        self.dynamic_switching();
    }

    fn observes(&self, own: &AircraftState, other: &TrafficView) -> bool {
        match self.mode {
            Mode::Planar => {
                let g = self.cfg.geometry_2d();
                let rel = (other.position - own.position).horizontal();
                let proj = rel + (other.velocity - own.velocity()).horizontal() * g.lookahead;
                rel.norm() <= g.outer_radius || proj.norm() <= g.outer_radius
            }
            Mode::Spatial => enters_cylinder(own, other, &self.cfg.geometry_3d()),
        }
    }

    fn dynamic_switching(&mut self) {
        let dynamic: Vec<usize> = (0..self.n_manned()).filter(|&i| self.manned[i].active && self.manned[i].pilot.is_dynamic()).collect();
        if dynamic.len() < 2 {
            return;
        }
        let window_ticks = (self.cfg.observation_window / self.cfg.decision_period_uas).ceil() as u64;
        let planar = self.mode == Mode::Planar;
        let view = |m: &Manned, id| TrafficView { id, position: m.state.position, velocity: m.state.velocity() };
        for (x, &i) in dynamic.iter().enumerate() {
            for &j in &dynamic[x + 1..] {
                let (a, b) = (&self.manned[i], &self.manned[j]);
                let mutual = self.observes(&a.state, &view(b, j)) && self.observes(&b.state, &view(a, i));
                let watch = self.watches.entry((i, j)).or_default();
                if !mutual {
                    *watch = SwitchWatch::default();
                    continue;
                }
                let since = *watch.since.get_or_insert(self.tick);
                if watch.switched || self.tick - since < window_ticks {
                    continue;
                }
                let (ka, kb) = (Kinematics::new(a.state.position, a.state.velocity()), Kinematics::new(b.state.position, b.state.velocity()));
                let (_, r_m) = closest_approach(&ka, &kb, self.cfg.switch_projection);
                let conflict = metrics::in_violation(Vec3::ZERO, r_m, planar);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.cfg.seed, (i as u64) << 40 ^ (j as u64) << 20 ^ self.tick));
                let (lo, hi) = self.manned.split_at_mut(j);
                let switched = dynamic_level_update([&mut lo[i].pilot, &mut hi[0].pilot], [false; 2], conflict, self.cfg.switch_rule, &mut rng);
                let count = switched.iter().filter(|s| **s).count() as u32;
                if count > 0 {
                    self.level_switches += count;
                    self.watches.get_mut(&(i, j)).expect("watch exists").switched = true;
                }
            }
        }
    }

    pub fn finish(mut self) -> RunOutput {
        self.log_tick();
        let n_m = self.n_manned();
        let name = |v: usize| if v < n_m { self.manned[v].id.as_str() } else { self.uas[v - n_m].id.as_str() };
        let n = n_m + self.uas.len();
        let mut encounters = Vec::new();
        let mut violations = 0;
        let mut collisions = 0;
        let mut min_h = f64::INFINITY;
        for j in 1..n {
            for i in 0..j {
                let p = &self.pairs[pair_index(i, j)];
                violations += p.events();
                collisions += p.collisions();
                min_h = min_h.min(p.min_horizontal());
                if p.min_horizontal() < nm(10.0) {
                    encounters.push(EncounterRecord::from_tracker(name(i), name(j), p));
                }
            }
        }
        let manned_dev: Vec<f64> = self.manned.iter().filter(|m| m.deviation.count() > 0).map(|m| m.deviation.mean_nm()).collect();
        let metrics = ScenarioMetrics {
            separation_violations: violations,
            uas_manned_violations: self.uas_manned_violations,
            manned_manned_violations: self.manned_manned_violations,
            collision_count: collisions,
            manned_traj_deviation_mean: metrics::mean(&manned_dev),
            uas_traj_deviation: self.uas.iter().map(|u| u.deviation.mean_nm()).collect(),
            uas_flight_time: self.uas.iter().map(|u| u.flight_time).collect(),
            encounters,
            min_horizontal_nm: to_nm(min_h),
            level_switches: self.level_switches,
            sim_time: self.time(),
        };
        RunOutput { metrics, log: self.log.unwrap_or_default() }
    }
}

/// Runs a scenario to completion. External pilots fly straight.
pub fn run(sc: &Scenario, cfg: &SimConfig, policies: &PolicySet, opts: RunOptions) -> Result<RunOutput, EngineError> {
    run_with(sc, cfg, policies, opts, &mut |_| PilotAction::Straight)
}

pub fn run_with(
    sc: &Scenario,
    cfg: &SimConfig,
    policies: &PolicySet,
    opts: RunOptions,
    external: &mut dyn FnMut(&DecisionContext) -> PilotAction,
) -> Result<RunOutput, EngineError> {
    let mut w = World::new(sc, cfg, policies, opts)?;
    while !w.is_done() {
        w.step(external);
    }
    Ok(w.finish())
}

/// Episode length for a generated encounter: a minute past the planned
/// closest approach, capped at ten minutes.
pub fn encounter_duration(sc: &Scenario) -> f64 {
    sc.encounter_time.map_or(600.0, |t| (t + 60.0).min(600.0))
}

/// JSON-lines rendering of a trajectory log.
pub fn log_to_jsonl(log: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out += &serde_json::to_string(r).expect("log records serialize");
        out.push('\n');
    }
    out
}

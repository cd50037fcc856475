//! Pilot perception: the discrete 2D observation used by the tabular
//! learner, the 3D observation used by the neural Q-function, and the
//! best-trajectory / best-destination action hints.

use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_pilot_action, step_manned_with, AircraftState, PilotAction};
use crate::units::{ft, nm, point_segment_distance, wrap_angle, Vec3, DEG};

/// Another vehicle as seen by a pilot (ADS-B state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficView {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl TrafficView {
    pub fn heading(&self) -> f64 {
        self.velocity.bearing()
    }
}

pub const SECTORS: usize = 6;
pub const REGION_CODES: usize = 5;
pub const PLANAR_ACTIONS: usize = 3;
pub const STATE_COUNT_2D: usize = 421_875;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationGeometry2D {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Constant-velocity look-ahead used to decide which region an intruder
    /// is moving toward, s.
    pub lookahead: f64,
}

impl Default for ObservationGeometry2D {
    fn default() -> Self {
        Self { inner_radius: nm(1.0), outer_radius: nm(5.0), lookahead: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation2D {
    pub region_codes: [u8; SECTORS],
    pub bta: u8,
    pub bda: u8,
    pub previous_action: u8,
}

impl Observation2D {
    /// Mixed-radix index in `[0, STATE_COUNT_2D)`.
    pub fn index(&self) -> usize {
        let mut i = 0usize;
        for &c in &self.region_codes {
            i = i * REGION_CODES + c as usize;
        }
        i = i * PLANAR_ACTIONS + self.bta as usize;
        i = i * PLANAR_ACTIONS + self.bda as usize;
        i * PLANAR_ACTIONS + self.previous_action as usize
    }

    pub fn from_index(mut i: usize) -> Option<Self> {
        if i >= STATE_COUNT_2D {
            return None;
        }
        let previous_action = (i % PLANAR_ACTIONS) as u8;
        i /= PLANAR_ACTIONS;
        let bda = (i % PLANAR_ACTIONS) as u8;
        i /= PLANAR_ACTIONS;
        let bta = (i % PLANAR_ACTIONS) as u8;
        i /= PLANAR_ACTIONS;
        let mut region_codes = [0u8; SECTORS];
        for k in (0..SECTORS).rev() {
            region_codes[k] = (i % REGION_CODES) as u8;
            i /= REGION_CODES;
        }
        Some(Self { region_codes, bta, bda, previous_action })
    }
}

/// Sector of a relative bearing: sector 0 is centred dead ahead, numbering
/// runs clockwise.
pub fn sector_of(relative_bearing: f64) -> usize {
    let width = 360.0 * DEG / SECTORS as f64;
    let a = (relative_bearing + 0.5 * width).rem_euclid(360.0 * DEG);
    ((a / width) as usize).min(SECTORS - 1)
}

/// Approach-angle class 1..=4 of an intruder heading relative to own heading.
pub fn approach_code(own_heading: f64, intruder_heading: f64) -> u8 {
    let a = (intruder_heading - own_heading).rem_euclid(360.0 * DEG);
    ((a / (90.0 * DEG)) as u8).min(3) + 1
}

/// Region codes of the 2D observation. An intruder occupies the sector of
/// its projected relative position when that lies inside the outer circle,
/// otherwise the sector of its current position when that does.
pub fn region_codes(own: &AircraftState, traffic: &[TrafficView], geom: &ObservationGeometry2D) -> [u8; SECTORS] {
    let mut best: [Option<(f64, u8)>; SECTORS] = [None; SECTORS];
    let v_own = own.velocity();
    for t in traffic {
        let rel = (t.position - own.position).horizontal();
        let projected = rel + (t.velocity - v_own).horizontal() * geom.lookahead;
        let occupied = if projected.norm() <= geom.outer_radius {
            projected
        } else if rel.norm() <= geom.outer_radius {
            rel
        } else {
            continue;
        };
        let k = sector_of(wrap_angle(occupied.bearing() - own.heading));
        let d = rel.norm();
        if best[k].is_none_or(|(bd, _)| d < bd) {
            best[k] = Some((d, approach_code(own.heading, t.heading())));
        }
    }
    best.map(|b| b.map_or(0, |(_, c)| c))
}

/// Lookahead integration step for the action hints, s.
const HINT_DT_INT: f64 = 1.0;
const HINT_TIE: f64 = 1e-6;

/// Index of the smallest cost among Left/Straight/Right; near-ties prefer
/// Straight, then the lower code.
pub fn pick_best(costs: [f64; 3]) -> u8 {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if costs[1] - min <= HINT_TIE {
        return 1;
    }
    costs.iter().position(|&c| c - min <= HINT_TIE).unwrap_or(1) as u8
}

fn hint_positions(own: &AircraftState, horizon: f64) -> [Vec3; 3] {
    PilotAction::PLANAR.map(|a| step_manned_with(&apply_pilot_action(own, a), horizon, HINT_DT_INT).position)
}

pub fn best_trajectory_action(own: &AircraftState, horizon: f64) -> u8 {
    let p = hint_positions(own, horizon);
    pick_best(p.map(|x| point_segment_distance(x, own.origin, own.destination)))
}

pub fn best_destination_action(own: &AircraftState, horizon: f64) -> u8 {
    let p = hint_positions(own, horizon);
    pick_best(p.map(|x| (own.destination - x).norm()))
}

pub fn encode_2d(
    own: &AircraftState,
    traffic: &[TrafficView],
    geom: &ObservationGeometry2D,
    decision_period: f64,
    previous_action: PilotAction,
) -> Observation2D {
    let p = hint_positions(own, decision_period);
    Observation2D {
        region_codes: region_codes(own, traffic, geom),
        bta: pick_best(p.map(|x| point_segment_distance(x, own.origin, own.destination))),
        bda: pick_best(p.map(|x| (own.destination - x).norm())),
        previous_action: previous_action.code().min(2),
    }
}

// ---------------------------------------------------------------------------
// 3D

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationGeometry3D {
    /// Horizontal radius of the observation cylinder (distance horizon), m.
    pub distance_horizon: f64,
    /// Vertical half-height of the observation cylinder, m.
    pub vertical_half_height: f64,
    pub lookahead: f64,
}

impl Default for ObservationGeometry3D {
    fn default() -> Self {
        Self { distance_horizon: nm(10.0), vertical_half_height: ft(2000.0), lookahead: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation3D {
    pub sign_beta_h: i8,
    pub sign_beta_v: i8,
    pub intruder_status: u8,
    pub sign_phi_h: i8,
    pub sign_phi_v: i8,
    pub encounter_h: f64,
    pub encounter_v: f64,
    pub previous_action: PilotAction,
}

pub const SIGN_DEADBAND: f64 = 0.5 * DEG;
pub const NETWORK_INPUT_LEN: usize = 15;

pub fn sign_with_deadband(a: f64) -> i8 {
    if a > SIGN_DEADBAND {
        1
    } else if a < -SIGN_DEADBAND {
        -1
    } else {
        0
    }
}

/// Horizontal encounter class: head-on, crossing from the left, crossing
/// from the right, same direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizontalEncounter {
    HeadOn,
    CrossingLeft,
    CrossingRight,
    SameDirection,
}

impl HorizontalEncounter {
    pub fn code(self) -> f64 {
        match self {
            HorizontalEncounter::HeadOn => -1.0,
            HorizontalEncounter::CrossingLeft => -0.5,
            HorizontalEncounter::CrossingRight => 0.5,
            HorizontalEncounter::SameDirection => 1.0,
        }
    }
}

/// Vertical encounter class: converging from above or below, or
/// level/diverging with the intruder at or above / below own altitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalEncounter {
    ConvergingAbove,
    ConvergingBelow,
    LevelAbove,
    LevelBelow,
}

impl VerticalEncounter {
    pub fn code(self) -> f64 {
        match self {
            VerticalEncounter::ConvergingAbove => -1.0,
            VerticalEncounter::ConvergingBelow => -0.5,
            VerticalEncounter::LevelAbove => 0.5,
            VerticalEncounter::LevelBelow => 1.0,
        }
    }
}

pub fn classify_horizontal(own: &AircraftState, intruder: &TrafficView) -> HorizontalEncounter {
    let rel_heading = wrap_angle(intruder.heading() - own.heading).abs();
    if rel_heading >= 135.0 * DEG {
        HorizontalEncounter::HeadOn
    } else if rel_heading < 45.0 * DEG {
        HorizontalEncounter::SameDirection
    } else {
        let side = wrap_angle((intruder.position - own.position).bearing() - own.heading);
        if side < 0.0 {
            HorizontalEncounter::CrossingLeft
        } else {
            HorizontalEncounter::CrossingRight
        }
    }
}

/// Vertical rates closer than this count as level, m/s.
const LEVEL_RATE: f64 = 0.05;

pub fn classify_vertical(own: &AircraftState, intruder: &TrafficView) -> VerticalEncounter {
    let dz = intruder.position.z - own.position.z;
    let closure = intruder.velocity.z - own.velocity().z;
    let converging = closure.abs() > LEVEL_RATE && dz * closure < 0.0;
    match (converging, dz >= 0.0) {
        (true, true) => VerticalEncounter::ConvergingAbove,
        (true, false) => VerticalEncounter::ConvergingBelow,
        (false, true) => VerticalEncounter::LevelAbove,
        (false, false) => VerticalEncounter::LevelBelow,
    }
}

/// Whether the constant-velocity relative track of `t` enters the
/// observation cylinder around `own` within the look-ahead window.
pub fn enters_cylinder(own: &AircraftState, t: &TrafficView, geom: &ObservationGeometry3D) -> bool {
    let r = t.position - own.position;
    let v = t.velocity - own.velocity();
    let (mut lo, mut hi) = (0.0f64, geom.lookahead);
    // Vertical slab |r.z + v.z t| <= H.
    let h = geom.vertical_half_height;
    if v.z.abs() < 1e-12 {
        if r.z.abs() > h {
            return false;
        }
    } else {
        let (a, b) = ((-h - r.z) / v.z, (h - r.z) / v.z);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    // Horizontal disk |r_h + v_h t| <= D.
    let (rh, vh) = (r.horizontal(), v.horizontal());
    let d = geom.distance_horizon;
    let a = vh.norm_sq();
    let b = 2.0 * rh.dot(vh);
    let c = rh.norm_sq() - d * d;
    if a < 1e-12 {
        if c > 0.0 {
            return false;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return false;
        }
        let s = disc.sqrt();
        lo = lo.max((-b - s) / (2.0 * a));
        hi = hi.min((-b + s) / (2.0 * a));
    }
    lo <= hi
}

/// Horizontal and vertical angular offsets of the destination from the
/// current flight direction.
pub fn destination_offsets(own: &AircraftState) -> (f64, f64) {
    let to_dest = own.destination - own.position;
    let beta_h = wrap_angle(to_dest.bearing() - own.heading);
    let beta_v = to_dest.z.atan2(to_dest.horizontal_norm()) - own.pitch;
    (beta_h, beta_v)
}

/// The intruder that sets the 3D observation, if any: among those whose
/// relative track enters the cylinder, the horizontally nearest.
pub fn observed_intruder<'a>(
    own: &AircraftState,
    traffic: &'a [TrafficView],
    geom: &ObservationGeometry3D,
) -> Option<&'a TrafficView> {
    traffic
        .iter()
        .filter(|t| enters_cylinder(own, t, geom))
        .min_by(|a, b| {
            let da = (a.position - own.position).horizontal_norm();
            let db = (b.position - own.position).horizontal_norm();
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
}

pub fn encode_3d(
    own: &AircraftState,
    traffic: &[TrafficView],
    geom: &ObservationGeometry3D,
    previous_action: PilotAction,
) -> Observation3D {
    let (beta_h, beta_v) = destination_offsets(own);
    let mut o = Observation3D {
        sign_beta_h: sign_with_deadband(beta_h),
        sign_beta_v: sign_with_deadband(beta_v),
        intruder_status: 0,
        sign_phi_h: 0,
        sign_phi_v: 0,
        encounter_h: 0.0,
        encounter_v: 0.0,
        previous_action,
    };
    if let Some(t) = observed_intruder(own, traffic, geom) {
        let r = t.position - own.position;
        let phi_h = wrap_angle(r.bearing() - own.heading);
        let phi_v = r.z.atan2(r.horizontal_norm()) - own.pitch;
        o.intruder_status = 1;
        o.sign_phi_h = sign_with_deadband(phi_h);
        o.sign_phi_v = sign_with_deadband(phi_v);
        o.encounter_h = classify_horizontal(own, t).code();
        o.encounter_v = classify_vertical(own, t).code();
    }
    o
}

pub fn action_code_3d(a: PilotAction) -> [f64; 4] {
    match a {
        PilotAction::TurnLeft45 => [0.0, 0.0, 0.0, 1.0],
        PilotAction::Straight => [0.0, 0.0, 1.0, 0.0],
        PilotAction::TurnRight45 => [0.0, 1.0, 0.0, 0.0],
        PilotAction::PitchUp10 => [1.0, 0.0, 0.0, 0.0],
        PilotAction::PitchDown10 => [-1.0, -1.0, -1.0, -1.0],
    }
}

/// Network input for `Q(o, a)`: observation fields, previous action code,
/// candidate action code.
pub fn to_network_input(o: &Observation3D, a: PilotAction) -> [f64; NETWORK_INPUT_LEN] {
    let mut x = [0.0; NETWORK_INPUT_LEN];
    x[0] = o.sign_beta_h as f64;
    x[1] = o.sign_beta_v as f64;
    x[2] = o.intruder_status as f64;
    x[3] = o.sign_phi_h as f64;
    x[4] = o.sign_phi_v as f64;
    x[5] = o.encounter_h;
    x[6] = o.encounter_v;
    x[7..11].copy_from_slice(&action_code_3d(o.previous_action));
    x[11..15].copy_from_slice(&action_code_3d(a));
    x
}

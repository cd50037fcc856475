//! Separation-event bookkeeping and trajectory deviation.

use serde::{Deserialize, Serialize};

use crate::units::{point_segment_distance, to_ft, to_nm, Vec3};

pub const HORIZONTAL_SEPARATION: f64 = 5.0 * crate::units::NM;
pub const VERTICAL_SEPARATION: f64 = 1000.0 * crate::units::FT;
pub const COLLISION_RADIUS: f64 = 500.0 * crate::units::FT;
pub const COLLISION_HALF_HEIGHT: f64 = 100.0 * crate::units::FT;
/// Vertical minima are only tracked while the pair is this close.
const VERTICAL_TRACKING_RANGE: f64 = 10.0 * crate::units::NM;

/// Separation test for one pair; `planar` ignores altitude.
pub fn in_violation(a: Vec3, b: Vec3, planar: bool) -> bool {
    let d = b - a;
    d.horizontal_norm() < HORIZONTAL_SEPARATION && (planar || d.z.abs() < VERTICAL_SEPARATION)
}

pub fn in_collision(a: Vec3, b: Vec3, planar: bool) -> bool {
    let d = b - a;
    d.horizontal_norm() < COLLISION_RADIUS && (planar || d.z.abs() < COLLISION_HALF_HEIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairState {
    open: bool,
    collided: bool,
    events: u32,
    collisions: u32,
    min_h: f64,
    min_v: f64,
}

impl Default for PairState {
    fn default() -> Self {
        Self { open: false, collided: false, events: 0, collisions: 0, min_h: f64::INFINITY, min_v: f64::INFINITY }
    }
}

/// Violation events of one pair: an event opens when both minima are
/// breached and closes when either clears. A collision is counted at most
/// once per event.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairTracker {
    state: PairState,
}

impl PairTracker {
    /// Feeds one sample; returns `(event opened, collision counted)`.
    pub fn observe(&mut self, a: Vec3, b: Vec3, planar: bool) -> (bool, bool) {
        let s = &mut self.state;
        let d = b - a;
        let h = d.horizontal_norm();
        s.min_h = s.min_h.min(h);
        if h < VERTICAL_TRACKING_RANGE {
            s.min_v = s.min_v.min(d.z.abs());
        }
        let violated = in_violation(a, b, planar);
        let mut opened = false;
        if violated && !s.open {
            s.open = true;
            s.collided = false;
            s.events += 1;
            opened = true;
        } else if !violated {
            s.open = false;
        }
        let mut hit = false;
        if s.open && !s.collided && in_collision(a, b, planar) {
            s.collided = true;
            s.collisions += 1;
            hit = true;
        }
        (opened, hit)
    }

    pub fn events(&self) -> u32 {
        self.state.events
    }

    pub fn collisions(&self) -> u32 {
        self.state.collisions
    }

    /// Smallest horizontal distance seen, m.
    pub fn min_horizontal(&self) -> f64 {
        self.state.min_h
    }

    /// Smallest vertical distance seen while horizontally within 10 nm, m.
    pub fn min_vertical(&self) -> f64 {
        self.state.min_v
    }
}

/// Counts violation events in a sampled pair history.
pub fn count_separation_violations(samples: &[(Vec3, Vec3)], planar: bool) -> u32 {
    let mut t = PairTracker::default();
    for (a, b) in samples {
        t.observe(*a, *b, planar);
    }
    t.events()
}

/// Running mean of the perpendicular distance to a reference path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationAccumulator {
    sum: f64,
    count: u64,
}

impl DeviationAccumulator {
    pub fn add(&mut self, p: Vec3, from: Vec3, to: Vec3) {
        self.sum += point_segment_distance(p, from, to);
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean offset, nm (0 without samples).
    pub fn mean_nm(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            to_nm(self.sum / self.count as f64)
        }
    }
}

/// Mean perpendicular offset of sampled positions from the segment, nm.
pub fn trajectory_deviation(samples: &[Vec3], from: Vec3, to: Vec3) -> f64 {
    let mut acc = DeviationAccumulator::default();
    for p in samples {
        acc.add(*p, from, to);
    }
    acc.mean_nm()
}

/// Closest approach of one vehicle pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub a: String,
    pub b: String,
    pub min_horizontal_nm: f64,
    /// Smallest vertical distance while within 10 nm, ft (infinite if never).
    pub min_vertical_ft: f64,
    pub violations: u32,
}

impl EncounterRecord {
    pub(crate) fn from_tracker(a: &str, b: &str, t: &PairTracker) -> Self {
        Self {
            a: a.to_string(),
            b: b.to_string(),
            min_horizontal_nm: to_nm(t.min_horizontal()),
            min_vertical_ft: to_ft(t.min_vertical()),
            violations: t.events(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    /// Violation events over all vehicle pairs.
    pub separation_violations: u32,
    pub uas_manned_violations: u32,
    pub manned_manned_violations: u32,
    pub collision_count: u32,
    /// Mean over manned aircraft of their mean path offset, nm.
    pub manned_traj_deviation_mean: f64,
    /// Mean offset from the current waypoint leg per UAS, nm.
    pub uas_traj_deviation: Vec<f64>,
    /// Time to complete the waypoint plan per UAS, s (None if unfinished).
    pub uas_flight_time: Vec<Option<f64>>,
    /// Pairs that came within 10 nm horizontally.
    pub encounters: Vec<EncounterRecord>,
    /// Smallest horizontal distance between any two vehicles, nm.
    pub min_horizontal_nm: f64,
    pub level_switches: u32,
    pub sim_time: f64,
}

impl ScenarioMetrics {
    pub fn uas_traj_deviation_mean(&self) -> f64 {
        mean(&self.uas_traj_deviation)
    }

    pub fn uas_flight_time_mean(&self) -> f64 {
        let done: Vec<f64> = self.uas_flight_time.iter().flatten().copied().collect();
        if done.is_empty() {
            f64::NAN
        } else {
            mean(&done)
        }
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

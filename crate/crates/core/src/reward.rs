//! Pilot rewards. Safety terms (collision, separation, closing) and
//! performance terms (destination progress, path deviation, effort) are
//! combined linearly with nonnegative weights.

use serde::{Deserialize, Serialize};

use crate::dynamics::{AircraftState, PilotAction};
use crate::perception::{destination_offsets, TrafficView};
use crate::units::{ft, nm, point_segment_distance, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights2D {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
}

impl Default for RewardWeights2D {
    fn default() -> Self {
        Self { w1: 10.0, w2: 4.0, w3: 1.0, w4: 1.0, w5: 1.0, w6: 0.2 }
    }
}

impl RewardWeights2D {
    pub fn as_array(&self) -> [f64; 6] {
        [self.w1, self.w2, self.w3, self.w4, self.w5, self.w6]
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        check_weights(&self.as_array())
    }

    /// Weights with the safety part rescaled so that `safety_ratio == r`,
    /// keeping the performance weights and the relative safety mix.
    pub fn with_safety_ratio(&self, r: f64) -> Result<Self, RewardError> {
        let current = safety_ratio(self)?;
        if current <= 0.0 || !(r > 0.0) {
            return Err(RewardError::DegenerateWeights);
        }
        let k = r / current;
        Ok(Self { w1: self.w1 * k, w2: self.w2 * k, w3: self.w3 * k, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights3D {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl Default for RewardWeights3D {
    fn default() -> Self {
        Self { w1: 10.0, w2: 4.0, w3: 1.0, w4: 1.0 }
    }
}

impl RewardWeights3D {
    pub fn validate(&self) -> Result<(), RewardError> {
        check_weights(&[self.w1, self.w2, self.w3, self.w4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RewardError {
    #[error("degenerate reward weights")]
    DegenerateWeights,
}

fn check_weights(w: &[f64]) -> Result<(), RewardError> {
    if w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().any(|x| *x > 0.0) {
        Ok(())
    } else {
        Err(RewardError::DegenerateWeights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionSnapshot {
    /// Aircraft inside the collision region.
    pub c: f64,
    /// Aircraft inside the separation region.
    pub s: f64,
    /// Closing on the nearest observed intruder.
    pub ca: f64,
    /// Normalized progress toward the destination.
    pub d: f64,
    /// Path term: signed normalized drift from the ideal path (2D) or the
    /// away-from-destination flag (3D).
    pub p: f64,
    /// Maneuver effort.
    pub e: f64,
}

pub fn reward_2d(s: &DecisionSnapshot, w: &RewardWeights2D) -> f64 {
    -w.w1 * s.c - w.w2 * s.s - w.w3 * s.ca + w.w4 * s.d - w.w5 * s.p - w.w6 * s.e
}

pub fn reward_3d(s: &DecisionSnapshot, w: &RewardWeights3D) -> f64 {
    -w.w1 * s.c - w.w2 * s.s - w.w3 * s.ca - w.w4 * s.p
}

pub fn safety_ratio(w: &RewardWeights2D) -> Result<f64, RewardError> {
    let den = w.w4 + w.w5 + w.w6;
    if den > 0.0 && den.is_finite() {
        Ok((w.w1 + w.w2 + w.w3) / den)
    } else {
        Err(RewardError::DegenerateWeights)
    }
}

/// Protected regions used by the reward: horizontal radius and vertical
/// half-height (infinite in 2D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub radius: f64,
    pub half_height: f64,
}

impl Region {
    pub fn contains(&self, rel: Vec3) -> bool {
        rel.horizontal_norm() < self.radius && rel.z.abs() < self.half_height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRegions {
    pub collision: Region,
    pub separation: Region,
}

impl RewardRegions {
    pub fn planar() -> Self {
        Self {
            collision: Region { radius: ft(500.0), half_height: f64::INFINITY },
            separation: Region { radius: nm(5.0), half_height: f64::INFINITY },
        }
    }

    pub fn spatial() -> Self {
        Self {
            collision: Region { radius: ft(500.0), half_height: ft(100.0) },
            separation: Region { radius: nm(5.0), half_height: ft(1000.0) },
        }
    }
}

/// Which intruder the closing flag looks at: the nearest one that is
/// inside the given observation region.
pub fn closing_flag(own: &AircraftState, traffic: &[TrafficView], observation: &Region) -> f64 {
    let v = own.velocity();
    let nearest = traffic
        .iter()
        .filter(|t| observation.contains(t.position - own.position))
        .min_by(|a, b| {
            (a.position - own.position)
                .norm()
                .total_cmp(&(b.position - own.position).norm())
                .then(a.id.cmp(&b.id))
        });
    match nearest {
        Some(t) => {
            let r = t.position - own.position;
            let range_rate = r.dot(t.velocity - v);
            if range_rate < 0.0 {
                1.0
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

pub struct SnapshotInput<'a> {
    /// State when the decision was taken.
    pub before: &'a AircraftState,
    /// State at the end of the decision period.
    pub after: &'a AircraftState,
    /// Other vehicles at the end of the decision period.
    pub traffic: &'a [TrafficView],
    pub action: PilotAction,
    pub decision_period: f64,
    pub regions: RewardRegions,
    pub observation: Region,
    pub spatial: bool,
}

pub fn snapshot(inp: &SnapshotInput) -> DecisionSnapshot {
    let own = inp.after;
    let mut c = 0.0;
    let mut s = 0.0;
    for t in inp.traffic {
        let rel = t.position - own.position;
        if inp.regions.collision.contains(rel) {
            c += 1.0;
        }
        if inp.regions.separation.contains(rel) {
            s += 1.0;
        }
    }
    let scale = own.speed * inp.decision_period;
    let d_before = (inp.before.destination - inp.before.position).norm();
    let d_after = (own.destination - own.position).norm();
    let d = ((d_before - d_after) / scale).clamp(-1.0, 1.0);
    let p = if inp.spatial {
        let (bh0, bv0) = destination_offsets(inp.before);
        let (bh1, bv1) = destination_offsets(own);
        if bh1.abs() > bh0.abs() + 1e-9 || bv1.abs() > bv0.abs() + 1e-9 {
            1.0
        } else {
            0.0
        }
    } else {
        let p0 = point_segment_distance(inp.before.position, own.origin, own.destination);
        let p1 = point_segment_distance(own.position, own.origin, own.destination);
        ((p1 - p0) / scale).clamp(-1.0, 1.0)
    };
    DecisionSnapshot {
        c,
        s,
        ca: closing_flag(own, inp.traffic, &inp.observation),
        d,
        p,
        e: if inp.action == PilotAction::Straight { 0.0 } else { 1.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_manned;
    use crate::units::knots;
    use proptest::prelude::*;

    #[test]
    fn reward_2d_examples() {
        let w1 = RewardWeights2D { w1: 1.0, w2: 1.0, w3: 1.0, w4: 1.0, w5: 1.0, w6: 1.0 };
        assert_eq!(reward_2d(&DecisionSnapshot::default(), &w1), 0.0);
        let s = DecisionSnapshot { c: 0.0, s: 1.0, ca: 1.0, d: 0.5, p: 0.2, e: 1.0 };
        assert!((reward_2d(&s, &w1) + 2.7).abs() < 1e-12);
        let w2 = RewardWeights2D { w1: 2.0, w2: 2.0, w3: 2.0, w4: 2.0, w5: 2.0, w6: 2.0 };
        assert!((reward_2d(&s, &w2) - 2.0 * reward_2d(&s, &w1)).abs() < 1e-12);
    }

    #[test]
    fn reward_3d_examples() {
        let w = RewardWeights3D { w1: 1.0, w2: 1.0, w3: 1.0, w4: 1.0 };
        assert_eq!(reward_3d(&DecisionSnapshot::default(), &w), 0.0);
        let s = DecisionSnapshot { c: 1.0, ..Default::default() };
        assert_eq!(reward_3d(&s, &w), -1.0);
    }

    #[test]
    fn ratio_examples() {
        let ones = RewardWeights2D { w1: 1.0, w2: 1.0, w3: 1.0, w4: 1.0, w5: 1.0, w6: 1.0 };
        assert_eq!(safety_ratio(&ones), Ok(1.0));
        let twos = RewardWeights2D { w1: 2.0, w2: 2.0, w3: 2.0, ..ones };
        assert_eq!(safety_ratio(&twos), Ok(2.0));
        let degenerate = RewardWeights2D { w1: 1.0, w2: 0.0, w3: 0.0, w4: 0.0, w5: 0.0, w6: 0.0 };
        assert_eq!(safety_ratio(&degenerate), Err(RewardError::DegenerateWeights));
        let scaled = RewardWeights2D::default().with_safety_ratio(4.0).unwrap();
        assert!((safety_ratio(&scaled).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(scaled.w4, 1.0);
    }

    fn lone() -> AircraftState {
        AircraftState::aimed(Vec3::ZERO, knots(400.0), Vec3::new(0.0, nm(100.0), 0.0))
    }

    #[test]
    fn lone_aircraft_snapshot() {
        let before = lone();
        let after = step_manned(&before, 20.0);
        let s = snapshot(&SnapshotInput {
            before: &before,
            after: &after,
            traffic: &[],
            action: PilotAction::Straight,
            decision_period: 20.0,
            regions: RewardRegions::planar(),
            observation: Region { radius: nm(5.0), half_height: f64::INFINITY },
            spatial: false,
        });
        assert_eq!((s.c, s.s, s.ca, s.e), (0.0, 0.0, 0.0, 0.0));
        assert!((s.d - 1.0).abs() < 1e-9);
        assert!(s.p.abs() < 1e-9);
    }

    #[test]
    fn regions_count_intruders() {
        let own = lone();
        let at = |x: f64, z: f64| TrafficView { id: 1, position: Vec3::new(x, 0.0, z), velocity: Vec3::ZERO };
        let mk = |t: &[TrafficView], regions, spatial| {
            snapshot(&SnapshotInput {
                before: &own,
                after: &own,
                traffic: t,
                action: PilotAction::Straight,
                decision_period: 20.0,
                regions,
                observation: Region { radius: nm(5.0), half_height: ft(2000.0) },
                spatial,
            })
        };
        assert!(mk(&[at(nm(4.0), 0.0)], RewardRegions::planar(), false).s >= 1.0);
        let s = mk(&[at(ft(400.0), ft(50.0))], RewardRegions::spatial(), true);
        assert!(s.c >= 1.0 && s.s >= 1.0);
        let s = mk(&[at(ft(400.0), ft(150.0))], RewardRegions::spatial(), true);
        assert_eq!(s.c, 0.0);
    }

    proptest! {
        #[test]
        fn snapshot_bounds(h in -3.1..3.1f64, dx in -10.0..10.0f64, dy in -10.0..10.0f64, dh in -3.1..3.1f64, a in 0u8..3) {
            let mut before = lone();
            before.heading = h;
            let action = PilotAction::from_code(a).unwrap();
            let after = step_manned(&crate::dynamics::apply_pilot_action(&before, action), 20.0);
            let t = TrafficView { id: 1, position: Vec3::new(nm(dx), nm(dy), 0.0), velocity: Vec3::new(dh.sin(), dh.cos(), 0.0) * 200.0 };
            for spatial in [false, true] {
                let s = snapshot(&SnapshotInput {
                    before: &before, after: &after, traffic: &[t], action, decision_period: 20.0,
                    regions: if spatial { RewardRegions::spatial() } else { RewardRegions::planar() },
                    observation: Region { radius: nm(5.0), half_height: f64::INFINITY }, spatial,
                });
                prop_assert!(s.c <= s.s);
                prop_assert!(s.d.abs() <= 1.0);
                prop_assert!(s.p.abs() <= 1.0);
                prop_assert!(reward_3d(&s, &RewardWeights3D::default()) <= 0.0);
            }
        }

        #[test]
        fn reward_is_linear(c in 0.0..3.0f64, s in 0.0..3.0f64, d in -1.0..1.0f64, k in 0.01..100.0f64) {
            let snap = DecisionSnapshot { c, s: s + c, ca: 1.0, d, p: 0.3, e: 1.0 };
            let w = RewardWeights2D::default();
            let wk = RewardWeights2D { w1: w.w1 * k, w2: w.w2 * k, w3: w.w3 * k, w4: w.w4 * k, w5: w.w5 * k, w6: w.w6 * k };
            prop_assert!((reward_2d(&snap, &wk) - k * reward_2d(&snap, &w)).abs() < 1e-9 * k.max(1.0) * 100.0);
        }
    }
}

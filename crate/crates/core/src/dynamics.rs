//! Manned-aircraft attitude dynamics and UAS first-order velocity dynamics.
//!
//! Manned aircraft fly at constant speed; heading and pitch relax toward
//! their commanded values with a 10 s time constant. The UAS velocity vector
//! relaxes toward its command with a 1 s time constant.

use serde::{Deserialize, Serialize};

use crate::units::{angle_diff, ft, wrap_angle, Vec3, DEG};

pub const ATTITUDE_TIME_CONSTANT: f64 = 10.0;
pub const UAS_TIME_CONSTANT: f64 = 1.0;
pub const DEFAULT_DT_INT: f64 = 0.1;
pub const TURN_STEP: f64 = 45.0 * DEG;
pub const PITCH_STEP: f64 = 10.0 * DEG;
pub const MAX_PITCH_COMMAND: f64 = 30.0 * DEG;
pub const WAYPOINT_CAPTURE_RADIUS: f64 = 0.5 * crate::units::NM;

pub fn altitude_floor() -> f64 {
    0.0
}

pub fn altitude_ceiling() -> f64 {
    ft(45_000.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PilotAction {
    TurnLeft45,
    Straight,
    TurnRight45,
    PitchUp10,
    PitchDown10,
}

impl PilotAction {
    pub const ALL: [PilotAction; 5] = [
        PilotAction::TurnLeft45,
        PilotAction::Straight,
        PilotAction::TurnRight45,
        PilotAction::PitchUp10,
        PilotAction::PitchDown10,
    ];
    /// The horizontal-only action set of the tabular pilot.
    pub const PLANAR: [PilotAction; 3] = [
        PilotAction::TurnLeft45,
        PilotAction::Straight,
        PilotAction::TurnRight45,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<PilotAction> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub position: Vec3,
    /// Constant airspeed, m/s.
    pub speed: f64,
    pub heading: f64,
    pub pitch: f64,
    pub commanded_heading: f64,
    pub commanded_pitch: f64,
    pub origin: Vec3,
    pub destination: Vec3,
}

impl AircraftState {
    /// Aircraft at `position` flying level toward `destination`, with the
    /// ideal path running from `position` to `destination`.
    pub fn aimed(position: Vec3, speed: f64, destination: Vec3) -> Self {
        let heading = (destination - position).bearing();
        Self {
            position,
            speed,
            heading,
            pitch: 0.0,
            commanded_heading: heading,
            commanded_pitch: 0.0,
            origin: position,
            destination,
        }
    }

    pub fn velocity(&self) -> Vec3 {
        velocity_from(self.speed, self.heading, self.pitch)
    }
}

pub fn velocity_from(speed: f64, heading: f64, pitch: f64) -> Vec3 {
    let (sp, cp) = heading.sin_cos();
    let (st, ct) = pitch.sin_cos();
    Vec3::new(speed * sp * ct, speed * cp * ct, speed * st)
}

/// Sets the attitude command for `a`. Turns are relative to the current
/// heading; pitch commands are relative to the current pitch and saturate
/// at +/-30 degrees.
pub fn apply_pilot_action(s: &AircraftState, a: PilotAction) -> AircraftState {
    let mut out = *s;
    match a {
        PilotAction::Straight => {}
        PilotAction::TurnLeft45 => out.commanded_heading = wrap_angle(s.heading - TURN_STEP),
        PilotAction::TurnRight45 => out.commanded_heading = wrap_angle(s.heading + TURN_STEP),
        PilotAction::PitchUp10 => {
            out.commanded_pitch = (s.pitch + PITCH_STEP).clamp(-MAX_PITCH_COMMAND, MAX_PITCH_COMMAND)
        }
        PilotAction::PitchDown10 => {
            out.commanded_pitch = (s.pitch - PITCH_STEP).clamp(-MAX_PITCH_COMMAND, MAX_PITCH_COMMAND)
        }
    }
    out
}

pub fn step_manned(s: &AircraftState, dt: f64) -> AircraftState {
    step_manned_with(s, dt, DEFAULT_DT_INT)
}

/// Advances a manned aircraft by `dt` using sub-steps no longer than
/// `dt_int`. Attitude uses the exact exponential solution of the first-order
/// lag; position uses the midpoint velocity of each sub-step.
pub fn step_manned_with(s: &AircraftState, dt: f64, dt_int: f64) -> AircraftState {
    debug_assert!(dt > 0.0 && dt_int > 0.0);
    let n = ((dt / dt_int) - 1e-9).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let decay = (-h / ATTITUDE_TIME_CONSTANT).exp();
    let half_decay = (-0.5 * h / ATTITUDE_TIME_CONSTANT).exp();
    let mut out = *s;
    for _ in 0..n {
        // Leaving the altitude band is not allowed: such pitch commands level off.
        if (out.position.z <= altitude_floor() && out.commanded_pitch < 0.0)
            || (out.position.z >= altitude_ceiling() && out.commanded_pitch > 0.0)
        {
            out.commanded_pitch = 0.0;
        }
        let heading_err = angle_diff(out.heading, out.commanded_heading);
        let pitch_err = out.pitch - out.commanded_pitch;
        let mid_heading = out.commanded_heading + heading_err * half_decay;
        let mid_pitch = out.commanded_pitch + pitch_err * half_decay;
        out.position += velocity_from(out.speed, mid_heading, mid_pitch) * h;
        out.heading = wrap_angle(out.commanded_heading + heading_err * decay);
        out.pitch = out.commanded_pitch + pitch_err * decay;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UasState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub commanded_velocity: Vec3,
    pub cruise_speed: f64,
    pub waypoints: Vec<Vec3>,
    pub next_waypoint_index: usize,
}

impl UasState {
    pub fn default_cruise_speed() -> f64 {
        crate::units::knots(340.0)
    }

    /// UAS at `position` already flying toward the first waypoint at cruise.
    pub fn new(position: Vec3, waypoints: Vec<Vec3>) -> Self {
        let cruise = Self::default_cruise_speed();
        let velocity = waypoints
            .first()
            .and_then(|w| (*w - position).normalized())
            .map(|d| d * cruise)
            .unwrap_or(Vec3::ZERO);
        Self {
            position,
            velocity,
            commanded_velocity: velocity,
            cruise_speed: cruise,
            waypoints,
            next_waypoint_index: 0,
        }
    }

    /// The current leg: previous waypoint (or `start`) to the next waypoint.
    pub fn current_leg(&self, start: Vec3) -> Option<(Vec3, Vec3)> {
        let next = *self.waypoints.get(self.next_waypoint_index)?;
        let prev = if self.next_waypoint_index == 0 {
            start
        } else {
            self.waypoints[self.next_waypoint_index - 1]
        };
        Some((prev, next))
    }
}

/// Exact solution of the first-order velocity lag over `dt`.
pub fn step_uas(s: &UasState, dt: f64) -> UasState {
    debug_assert!(dt > 0.0);
    let mut out = s.clone();
    let k = (-dt / UAS_TIME_CONSTANT).exp();
    let dv = s.velocity - s.commanded_velocity;
    out.velocity = s.commanded_velocity + dv * k;
    out.position = s.position + s.commanded_velocity * dt + dv * (UAS_TIME_CONSTANT * (1.0 - k));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("all waypoints consumed")]
pub struct MissionComplete;

/// Velocity command toward the next waypoint at cruise speed. Waypoints
/// inside the capture radius are consumed first.
pub fn waypoint_guidance(s: &mut UasState) -> Result<Vec3, MissionComplete> {
    while let Some(wp) = s.waypoints.get(s.next_waypoint_index) {
        let to_wp = *wp - s.position;
        if to_wp.norm() <= WAYPOINT_CAPTURE_RADIUS {
            s.next_waypoint_index += 1;
            continue;
        }
        return Ok(to_wp.normalized().unwrap_or(Vec3::ZERO) * s.cruise_speed);
    }
    Err(MissionComplete)
}

/// Manned speed limits accepted by scenario loading, m/s.
pub fn manned_speed_range() -> (f64, f64) {
    (crate::units::knots(150.0), crate::units::knots(550.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::knots;
    use proptest::prelude::*;

    fn level(heading_deg: f64) -> AircraftState {
        let mut s = AircraftState::aimed(Vec3::new(0.0, 0.0, ft(30_000.0)), knots(400.0), Vec3::new(0.0, 1e6, ft(30_000.0)));
        s.heading = heading_deg * DEG;
        s.commanded_heading = s.heading;
        s
    }

    #[test]
    fn straight_keeps_command() {
        let s = level(0.0);
        let a = apply_pilot_action(&s, PilotAction::Straight);
        assert_eq!(a.commanded_heading, 0.0);
    }

    #[test]
    fn turn_and_pitch_commands() {
        let s = level(0.0);
        let r = apply_pilot_action(&s, PilotAction::TurnRight45);
        assert!((r.commanded_heading - 45.0 * DEG).abs() < 1e-12);
        let l = apply_pilot_action(&s, PilotAction::TurnLeft45);
        assert!((l.commanded_heading + 45.0 * DEG).abs() < 1e-12);
        let u = apply_pilot_action(&s, PilotAction::PitchUp10);
        assert!((u.commanded_pitch - 10.0 * DEG).abs() < 1e-12);
    }

    #[test]
    fn pitch_command_saturates() {
        let mut s = level(0.0);
        s.pitch = 25.0 * DEG;
        let u = apply_pilot_action(&s, PilotAction::PitchUp10);
        assert!((u.commanded_pitch - 30.0 * DEG).abs() < 1e-12);
        s.pitch = -28.0 * DEG;
        let d = apply_pilot_action(&s, PilotAction::PitchDown10);
        assert!((d.commanded_pitch + 30.0 * DEG).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_heading_is_fixed() {
        let s = level(30.0);
        for dt in [0.1, 1.0, 7.3, 100.0] {
            let n = step_manned(&s, dt);
            assert!((n.heading - 30.0 * DEG).abs() < 1e-12);
        }
    }

    #[test]
    fn heading_follows_closed_form() {
        let mut s = level(0.0);
        s.commanded_heading = 45.0 * DEG;
        let n = step_manned(&s, 10.0);
        let expected = 45.0 * (1.0 - (-1.0f64).exp());
        assert!((n.heading / DEG - expected).abs() < 1e-9, "{}", n.heading / DEG);
        assert!((expected - 28.45).abs() < 0.01);
    }

    #[test]
    fn heading_uses_shortest_arc() {
        let mut s = level(179.0);
        s.commanded_heading = -179.0 * DEG;
        let n = step_manned(&s, 1000.0);
        assert!(angle_diff(n.heading, -179.0 * DEG).abs() < 1e-9);
        // Never swung through north on the way.
        let mid = step_manned(&s, 5.0);
        assert!(mid.heading.abs() > 178.0 * DEG);
    }

    #[test]
    fn ceiling_levels_off_climb() {
        let mut s = level(0.0);
        s.position.z = altitude_ceiling() - 10.0;
        s.commanded_pitch = 10.0 * DEG;
        let n = step_manned(&s, 120.0);
        assert_eq!(n.commanded_pitch, 0.0);
        assert!(n.pitch.abs() < 1e-3);
    }

    #[test]
    fn uas_equilibrium_and_closed_form() {
        let mut s = UasState::new(Vec3::ZERO, vec![Vec3::new(1e6, 0.0, 0.0)]);
        s.velocity = Vec3::new(50.0, 0.0, 0.0);
        s.commanded_velocity = s.velocity;
        let n = step_uas(&s, 10.0);
        assert_eq!(n.velocity, s.velocity);
        assert!((n.position.x - 500.0).abs() < 1e-9);

        s.velocity = Vec3::ZERO;
        s.commanded_velocity = Vec3::new(100.0, 0.0, 0.0);
        let n = step_uas(&s, 1.0);
        assert!((n.velocity.x - 63.212).abs() < 1e-3);
        assert!((n.velocity.x - 100.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn uas_substeps_compose() {
        let mut s = UasState::new(Vec3::ZERO, vec![Vec3::new(1e6, 0.0, 0.0)]);
        s.velocity = Vec3::new(10.0, -3.0, 1.0);
        s.commanded_velocity = Vec3::new(150.0, 20.0, 0.0);
        let once = step_uas(&s, 3.0);
        let mut many = s.clone();
        for _ in 0..30 {
            many = step_uas(&many, 0.1);
        }
        assert!((once.position - many.position).norm() < 1e-9);
        assert!((once.velocity - many.velocity).norm() < 1e-12);
    }

    #[test]
    fn guidance_points_at_waypoint() {
        let mut s = UasState::new(Vec3::ZERO, vec![Vec3::new(1000.0, 0.0, 0.0)]);
        s.cruise_speed = 100.0;
        let v = waypoint_guidance(&mut s).unwrap();
        assert!((v - Vec3::new(100.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn guidance_captures_and_completes() {
        let mut s = UasState::new(Vec3::ZERO, vec![Vec3::new(500.0, 0.0, 0.0), Vec3::new(50_000.0, 0.0, 0.0)]);
        waypoint_guidance(&mut s).unwrap();
        assert_eq!(s.next_waypoint_index, 1);
        s.position = Vec3::new(49_900.0, 0.0, 0.0);
        assert_eq!(waypoint_guidance(&mut s), Err(MissionComplete));
        assert_eq!(s.next_waypoint_index, 2);
    }

    proptest! {
        #[test]
        fn speed_is_preserved(h in -3.0..3.0f64, hd in -3.0..3.0f64, p in -0.5..0.5f64, pd in -0.5..0.5f64, dt in 0.05..30.0f64) {
            let mut s = level(0.0);
            s.heading = h; s.commanded_heading = hd; s.pitch = p; s.commanded_pitch = pd;
            let n = step_manned(&s, dt);
            prop_assert!((n.velocity().norm() - s.speed).abs() / s.speed < 1e-9);
        }

        #[test]
        fn heading_relaxation_rotation_equivariant(h in -3.0..3.0f64, hd in -3.0..3.0f64, rot in -3.0..3.0f64) {
            let mut a = level(0.0);
            a.heading = h; a.commanded_heading = hd;
            let mut b = a;
            b.heading = wrap_angle(h + rot);
            b.commanded_heading = wrap_angle(hd + rot);
            let na = step_manned(&a, 12.0);
            let nb = step_manned(&b, 12.0);
            prop_assert!(angle_diff(nb.heading, na.heading + rot).abs() < 1e-9);
            let pa = na.position.rotate_z(rot);
            prop_assert!((pa - nb.position).norm() < 1e-6);
        }
    }
}

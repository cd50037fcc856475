//! Scenario construction: snapshot files, single-encounter geometry and the
//! crowded airspace.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{manned_speed_range, AircraftState, UasState};
use crate::learning::persistence::Mode;
use crate::levelk::{assign_crowded_levels, PilotPolicy};
use crate::units::{ft, knots, nm, to_ft, to_knots, to_nm, Vec3, DEG};

/// Axis-aligned airspace `[0, width] x [0, length] x [0, ceiling]`, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Airspace {
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "length_m")]
    pub length: f64,
    #[serde(rename = "ceiling_m")]
    pub ceiling: f64,
}

impl Default for Airspace {
    fn default() -> Self {
        Self { width: 600_000.0, length: 300_000.0, ceiling: ft(45_000.0) }
    }
}

impl Airspace {
    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.length).contains(&p.y) && (0.0..=self.ceiling).contains(&p.z)
    }

    pub fn contains_horizontally(&self, p: Vec3) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.length).contains(&p.y)
    }

    /// Where a level ray from `p` along `heading` leaves the box.
    pub fn exit_point(&self, p: Vec3, heading: f64) -> Vec3 {
        let (dx, dy) = (heading.sin(), heading.cos());
        let mut t = f64::INFINITY;
        if dx > 1e-12 {
            t = t.min((self.width - p.x) / dx);
        } else if dx < -1e-12 {
            t = t.min(-p.x / dx);
        }
        if dy > 1e-12 {
            t = t.min((self.length - p.y) / dy);
        } else if dy < -1e-12 {
            t = t.min(-p.y / dy);
        }
        let t = t.max(0.0);
        Vec3::new(p.x + dx * t, p.y + dy * t, p.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannedSpec {
    pub id: String,
    pub state: AircraftState,
    pub pilot: PilotPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UasSpec {
    pub id: String,
    pub position: Vec3,
    pub waypoints: Vec<Vec3>,
    pub cruise_speed: f64,
}

impl UasSpec {
    pub fn state(&self) -> UasState {
        let mut s = UasState::new(self.position, self.waypoints.clone());
        s.cruise_speed = self.cruise_speed;
        if let Some(d) = s.velocity.normalized() {
            s.velocity = d * self.cruise_speed;
            s.commanded_velocity = s.velocity;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub airspace: Airspace,
    pub manned: Vec<MannedSpec>,
    pub uas: Vec<UasSpec>,
    /// Planned closest-approach time of a generated encounter, s.
    pub encounter_time: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("aircraft {id} starts outside the airspace")]
    OutOfBox { id: String },
    #[error("a scenario needs at least one manned aircraft")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.manned.is_empty() {
            return Err(ScenarioError::Empty);
        }
        let outside = self
            .manned
            .iter()
            .map(|m| (&m.id, m.state.position))
            .chain(self.uas.iter().map(|u| (&u.id, u.position)))
            .find(|(_, p)| !self.airspace.contains(*p));
        match outside {
            Some((id, _)) => Err(ScenarioError::OutOfBox { id: id.clone() }),
            None => Ok(()),
        }
    }

    pub fn set_pilots(&mut self, pilots: &[PilotPolicy]) {
        for (m, p) in self.manned.iter_mut().zip(pilots) {
            m.pilot = *p;
        }
    }
}

#[derive(Debug, Deserialize)]
struct MannedRow {
    id: String,
    x_nm: f64,
    y_nm: f64,
    alt_ft: f64,
    speed_kn: f64,
    heading_deg: f64,
}

#[derive(Debug, Deserialize)]
struct WaypointRow {
    id: String,
    wp_index: usize,
    x_nm: f64,
    y_nm: f64,
    alt_ft: f64,
}

fn csv_error(e: csv::Error) -> ScenarioError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    ScenarioError::Parse { line, message: e.to_string() }
}

/// Reads a traffic snapshot. Destinations are where each aircraft would
/// leave the airspace on its initial heading; pilots start as level-0 and
/// are normally reassigned by the caller. A UAS plan file lists waypoints;
/// each UAS starts at its waypoint 0.
pub fn load_scenario(path: &Path, mode: Mode, uas_path: Option<&Path>, airspace: Airspace) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let mut manned = Vec::new();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let (lo, hi) = manned_speed_range();
    for rec in reader.deserialize::<MannedRow>() {
        let row = rec.map_err(csv_error)?;
        let line = manned.len() + 2;
        let speed = knots(row.speed_kn);
        if !(lo..=hi).contains(&speed) {
            return Err(ScenarioError::Parse {
                line,
                message: format!("speed {} kn outside [{}, {}] kn", row.speed_kn, to_knots(lo).round(), to_knots(hi).round()),
            });
        }
        let alt = if mode == Mode::Planar { airspace.ceiling * 0.5 } else { ft(row.alt_ft) };
        let position = Vec3::new(nm(row.x_nm), nm(row.y_nm), alt);
        if !airspace.contains(position) {
            return Err(ScenarioError::OutOfBox { id: row.id });
        }
        let heading = row.heading_deg * DEG;
        let destination = airspace.exit_point(position, heading);
        let mut state = AircraftState::aimed(position, speed, destination);
        // An aircraft on the boundary heading outward has no path left;
        // keep its reported heading anyway.
        state.heading = crate::units::wrap_angle(heading);
        state.commanded_heading = state.heading;
        manned.push(MannedSpec { id: row.id, state, pilot: PilotPolicy::Level0 });
    }
    let mut uas = Vec::new();
    if let Some(p) = uas_path {
        let text = std::fs::read_to_string(p)?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let mut plans: Vec<(String, Vec<(usize, Vec3)>)> = Vec::new();
        for rec in reader.deserialize::<WaypointRow>() {
            let row = rec.map_err(csv_error)?;
            let alt = if mode == Mode::Planar { airspace.ceiling * 0.5 } else { ft(row.alt_ft) };
            let wp = Vec3::new(nm(row.x_nm), nm(row.y_nm), alt);
            match plans.iter_mut().find(|(id, _)| *id == row.id) {
                Some((_, v)) => v.push((row.wp_index, wp)),
                None => plans.push((row.id, vec![(row.wp_index, wp)])),
            }
        }
        for (id, mut wps) in plans {
            wps.sort_by_key(|(i, _)| *i);
            let pts: Vec<Vec3> = wps.into_iter().map(|(_, p)| p).collect();
            if pts.len() < 2 {
                return Err(ScenarioError::Parse { line: 0, message: format!("UAS {id} needs at least two waypoints") });
            }
            uas.push(UasSpec { id, position: pts[0], waypoints: pts[1..].to_vec(), cruise_speed: UasState::default_cruise_speed() });
        }
    }
    let sc = Scenario { mode, airspace, manned, uas, encounter_time: None };
    sc.validate()?;
    Ok(sc)
}

/// Writes a scenario in the snapshot formats read by [`load_scenario`].
pub fn write_scenario_csv(sc: &Scenario) -> (String, String) {
    let mut a = String::from("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\n");
    for m in &sc.manned {
        let s = &m.state;
        a += &format!(
            "{},{:?},{:?},{:?},{:?},{:?}\n",
            m.id,
            to_nm(s.position.x),
            to_nm(s.position.y),
            to_ft(s.position.z),
            to_knots(s.speed),
            s.heading / DEG
        );
    }
    let mut b = String::from("id,wp_index,x_nm,y_nm,alt_ft\n");
    for u in &sc.uas {
        for (i, p) in std::iter::once(u.position).chain(u.waypoints.iter().copied()).enumerate() {
            b += &format!("{},{},{:?},{:?},{:?}\n", u.id, i, to_nm(p.x), to_nm(p.y), to_ft(p.z));
        }
    }
    (a, b)
}

/// Randomization ranges for generated single encounters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncounterGeometry {
    pub speed_kn: (f64, f64),
    /// Altitude of the collision point, ft.
    pub altitude_ft: f64,
    /// Share of encounters flown co-altitude (3D).
    pub co_altitude_share: f64,
    /// Largest vertical offset of the other encounters, ft.
    pub max_vertical_offset_ft: f64,
    /// Free flight before the intruder can first be observed, s.
    #[serde(rename = "pre_roll_s")]
    pub pre_roll: f64,
    /// Pilot look-ahead used to place the encounter, s.
    #[serde(rename = "lookahead_s")]
    pub lookahead: f64,
    /// Separation radius used to place the encounter, m.
    #[serde(rename = "separation_m")]
    pub separation: f64,
}

impl Default for EncounterGeometry {
    fn default() -> Self {
        Self {
            speed_kn: (300.0, 450.0),
            altitude_ft: 30_000.0,
            co_altitude_share: 0.5,
            max_vertical_offset_ft: 900.0,
            pre_roll: 30.0,
            lookahead: 20.0,
            separation: nm(5.0),
        }
    }
}

fn encounter_airspace() -> Airspace {
    Airspace { width: 200_000.0, length: 200_000.0, ceiling: ft(45_000.0) }
}

/// Two manned aircraft on constant-velocity collision courses meeting at the
/// centre of a 200 km x 200 km box. The approach angle is the angle between
/// the two tracks (180 = head-on). The meeting time is chosen so that the
/// intruder first becomes observable at `distance_horizon` after the
/// pre-roll, and separation is lost `lookahead` seconds after that.
pub fn generate_single_encounter(
    mode: Mode,
    approach_deg: f64,
    pilots: [PilotPolicy; 2],
    distance_horizon: f64,
    geom: &EncounterGeometry,
    seed: u64,
) -> Scenario {
    assert!(approach_deg > 0.0 && approach_deg <= 180.0, "approach angle must lie in (0, 180]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v1 = knots(rng.gen_range(geom.speed_kn.0..=geom.speed_kn.1));
    let v2 = knots(rng.gen_range(geom.speed_kn.0..=geom.speed_kn.1));
    let h1: f64 = rng.gen_range(0.0..360.0) * DEG;
    let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let h2 = h1 + side * (180.0 - approach_deg) * DEG + std::f64::consts::PI;
    let dz = match mode {
        Mode::Planar => 0.0,
        Mode::Spatial => {
            if rng.gen_bool(geom.co_altitude_share) {
                0.0
            } else {
                ft(rng.gen_range(-geom.max_vertical_offset_ft..=geom.max_vertical_offset_ft))
            }
        }
    };
    let vel1 = Vec3::new(v1 * h1.sin(), v1 * h1.cos(), 0.0);
    let vel2 = Vec3::new(v2 * h2.sin(), v2 * h2.cos(), 0.0);
    let closing = (vel1 - vel2).norm().max(1.0);
    let t_c = geom.pre_roll + geom.lookahead + (distance_horizon.max(geom.separation)) / closing;
    let air = encounter_airspace();
    let meet = Vec3::new(air.width / 2.0, air.length / 2.0, ft(geom.altitude_ft));
    let p1 = meet - vel1 * t_c;
    let p2 = meet - vel2 * t_c + Vec3::new(0.0, 0.0, dz);
    let s1 = AircraftState::aimed(p1, v1, air.exit_point(p1, h1));
    let s2 = AircraftState::aimed(p2, v2, air.exit_point(p2, crate::units::wrap_angle(h2)));
    Scenario {
        mode,
        airspace: air,
        manned: vec![
            MannedSpec { id: "A".into(), state: s1, pilot: pilots[0] },
            MannedSpec { id: "B".into(), state: s2, pilot: pilots[1] },
        ],
        uas: Vec::new(),
        encounter_time: Some(t_c),
    }
}

/// Head-on meeting at 450 kn each: 21.3 nm apart horizontally, 1000 ft
/// vertically, tracks offset laterally by 0.54 nm.
pub fn sample_encounter_1(pilots: [PilotPolicy; 2]) -> Scenario {
    sample_encounter(pilots, nm(21.3), 0.0)
}

/// As [`sample_encounter_1`] from 21 nm, with the lower aircraft climbing
/// at 1968 ft/min.
pub fn sample_encounter_2(pilots: [PilotPolicy; 2]) -> Scenario {
    sample_encounter(pilots, nm(21.0), ft(1968.0) / 60.0)
}

fn sample_encounter(pilots: [PilotPolicy; 2], range: f64, climb_rate: f64) -> Scenario {
    let air = encounter_airspace();
    let v = knots(450.0);
    let z = ft(30_000.0);
    let c = Vec3::new(air.width / 2.0, air.length / 2.0, z);
    let lateral = nm(0.54) / 2.0;
    let p1 = c + Vec3::new(-range / 2.0, -lateral, 0.0);
    let p2 = c + Vec3::new(range / 2.0, lateral, ft(1000.0));
    let mut s1 = AircraftState::aimed(p1, v, Vec3::new(air.width, p1.y, z));
    let s2 = AircraftState::aimed(p2, v, Vec3::new(0.0, p2.y, p2.z));
    if climb_rate > 0.0 {
        let pitch = (climb_rate / v).asin();
        s1.pitch = pitch;
        s1.commanded_pitch = pitch;
    }
    Scenario {
        mode: Mode::Spatial,
        airspace: air,
        manned: vec![
            MannedSpec { id: "A".into(), state: s1, pilot: pilots[0] },
            MannedSpec { id: "B".into(), state: s2, pilot: pilots[1] },
        ],
        uas: Vec::new(),
        encounter_time: Some(range / (2.0 * v)),
    }
}

/// Desk-scale crowded airspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrowdedSpec {
    pub mode: Mode,
    pub n_manned: usize,
    pub n_uas: usize,
    pub airspace: Airspace,
    pub speed_kn: (f64, f64),
    /// Flight levels used in 3D, ft (inclusive, 1000 ft steps).
    pub flight_levels_ft: (f64, f64),
    pub dynamic_levels: bool,
}

impl Default for CrowdedSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Planar,
            n_manned: 60,
            n_uas: 1,
            airspace: Airspace { width: 200_000.0, length: 100_000.0, ceiling: ft(45_000.0) },
            speed_kn: (250.0, 500.0),
            flight_levels_ft: (25_000.0, 39_000.0),
            dynamic_levels: false,
        }
    }
}

/// Random traffic plus `n_uas` UAS crossing the box west to east through
/// four waypoints. Pilot levels follow the 10/60/30 mix.
pub fn crowded_scenario(spec: &CrowdedSpec, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = spec.airspace;
    let levels = ((spec.flight_levels_ft.1 - spec.flight_levels_ft.0) / 1000.0).floor() as i64;
    let alt = |rng: &mut ChaCha8Rng| match spec.mode {
        Mode::Planar => a.ceiling * 0.5,
        Mode::Spatial => ft(spec.flight_levels_ft.0 + 1000.0 * rng.gen_range(0..=levels) as f64),
    };
    let mut manned = Vec::with_capacity(spec.n_manned);
    for i in 0..spec.n_manned {
        let z = alt(&mut rng);
        let p = Vec3::new(rng.gen_range(0.0..a.width), rng.gen_range(0.0..a.length), z);
        let h = rng.gen_range(0.0..360.0) * DEG;
        let v = knots(rng.gen_range(spec.speed_kn.0..=spec.speed_kn.1));
        let mut s = AircraftState::aimed(p, v, a.exit_point(p, h));
        s.heading = crate::units::wrap_angle(h);
        s.commanded_heading = s.heading;
        manned.push(MannedSpec { id: format!("M{i}"), state: s, pilot: PilotPolicy::Level0 });
    }
    let pilots = assign_crowded_levels(spec.n_manned, rng.gen(), spec.dynamic_levels);
    for (m, p) in manned.iter_mut().zip(pilots) {
        m.pilot = p;
    }
    let mut uas = Vec::with_capacity(spec.n_uas);
    for i in 0..spec.n_uas {
        let z = alt(&mut rng);
        let y = |rng: &mut ChaCha8Rng| rng.gen_range(0.2 * a.length..0.8 * a.length);
        let start = Vec3::new(0.05 * a.width, y(&mut rng), z);
        let waypoints = [0.3, 0.55, 0.8, 0.95].iter().map(|f| Vec3::new(f * a.width, y(&mut rng), z)).collect();
        uas.push(UasSpec { id: format!("U{i}"), position: start, waypoints, cruise_speed: UasState::default_cruise_speed() });
    }
    Scenario { mode: spec.mode, airspace: a, manned, uas, encounter_time: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saa::{closest_approach, Kinematics};
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_three_aircraft() {
        let f = write("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\nA,10,10,30000,400,90\nB,50,20,31000,300,180\nC,100,100,29000,450,45\n");
        let sc = load_scenario(f.path(), Mode::Spatial, None, Airspace::default()).unwrap();
        assert_eq!(sc.manned.len(), 3);
        // Heading east from x = 10 nm leaves through the east wall.
        assert!((sc.manned[0].state.destination.x - 600_000.0).abs() < 1e-6);
        assert!((sc.manned[0].state.destination.y - nm(10.0)).abs() < 1e-6);
    }

    #[test]
    fn rejects_fast_aircraft_with_line() {
        let f = write("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\nA,10,10,30000,400,90\nB,10,10,30000,700,90\n");
        match load_scenario(f.path(), Mode::Spatial, None, Airspace::default()) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_empty_and_outside() {
        let f = write("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\n");
        assert!(matches!(load_scenario(f.path(), Mode::Planar, None, Airspace::default()), Err(ScenarioError::Empty)));
        let g = write("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\nA,-5,10,30000,400,90\n");
        assert!(matches!(load_scenario(g.path(), Mode::Planar, None, Airspace::default()), Err(ScenarioError::OutOfBox { .. })));
        let h = write("id,x_nm,y_nm,alt_ft,speed_kn,heading_deg\nA,abc,10,30000,400,90\n");
        assert!(matches!(load_scenario(h.path(), Mode::Planar, None, Airspace::default()), Err(ScenarioError::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let sc = crowded_scenario(&CrowdedSpec { mode: Mode::Spatial, n_manned: 5, n_uas: 2, ..Default::default() }, 3);
        let (a, b) = write_scenario_csv(&sc);
        let (fa, fb) = (write(&a), write(&b));
        let back = load_scenario(fa.path(), Mode::Spatial, Some(fb.path()), sc.airspace).unwrap();
        for (x, y) in sc.manned.iter().zip(&back.manned) {
            assert!((x.state.position - y.state.position).norm() < 1e-6);
            assert!((x.state.speed - y.state.speed).abs() < 1e-9);
        }
        assert_eq!(back.uas.len(), 2);
        assert_eq!(back.uas[1].waypoints.len(), 4);
    }

    #[test]
    fn head_on_has_zero_miss() {
        let sc = generate_single_encounter(Mode::Planar, 180.0, [PilotPolicy::Level0; 2], nm(5.0), &EncounterGeometry::default(), 1);
        let (a, b) = (&sc.manned[0].state, &sc.manned[1].state);
        let dh = angle(a.heading, b.heading);
        assert!((dh - 180.0).abs() < 1e-9);
        let (t, r) = closest_approach(&Kinematics::new(a.position, a.velocity()), &Kinematics::new(b.position, b.velocity()), 1e4);
        assert!(r.norm() < 1e-6);
        assert!((t - sc.encounter_time.unwrap()).abs() < 1e-6);
    }

    fn angle(a: f64, b: f64) -> f64 {
        crate::units::angle_diff(a, b).abs() / DEG
    }

    #[test]
    fn encounters_follow_requested_angle_and_timing() {
        let g = EncounterGeometry::default();
        for (i, ang) in [45.0, 90.0, 135.0, 180.0].iter().enumerate() {
            let sc = generate_single_encounter(Mode::Spatial, *ang, [PilotPolicy::Level0; 2], nm(10.0), &g, i as u64);
            sc.validate().unwrap();
            let (a, b) = (&sc.manned[0].state, &sc.manned[1].state);
            assert!((angle(a.heading, b.heading) - ang).abs() < 1e-9);
            assert!((a.position.z - b.position.z).abs() <= ft(900.0) + 1e-9);
            // Separation is lost lookahead + pre-roll seconds after the start
            // plus the time to close from the horizon to 5 nm.
            let closing = (a.velocity() - b.velocity()).norm();
            let t_loss = sc.encounter_time.unwrap() - nm(5.0) / closing;
            assert!(t_loss >= g.pre_roll + g.lookahead - 1e-9);
        }
    }

    #[test]
    fn fixed_sample_encounters() {
        let s1 = sample_encounter_1([PilotPolicy::Level0; 2]);
        let (a, b) = (&s1.manned[0].state, &s1.manned[1].state);
        assert!(((a.position - b.position).horizontal_norm() - nm(21.3)).abs() < nm(0.01));
        assert!(((b.position.z - a.position.z) - ft(1000.0)).abs() < 1e-9);
        let s2 = sample_encounter_2([PilotPolicy::Level0; 2]);
        let v = s2.manned[0].state.velocity();
        assert!((v.z - ft(1968.0) / 60.0).abs() < 1e-9);
    }

    #[test]
    fn crowded_is_inside_and_seeded() {
        let spec = CrowdedSpec { mode: Mode::Spatial, n_uas: 3, ..Default::default() };
        let sc = crowded_scenario(&spec, 5);
        sc.validate().unwrap();
        assert_eq!(sc.manned.len(), 60);
        assert_eq!(sc.uas.len(), 3);
        assert_eq!(sc, crowded_scenario(&spec, 5));
        for m in &sc.manned {
            assert_eq!(m.state.position.z % ft(1000.0) < 1e-6 || (ft(1000.0) - m.state.position.z % ft(1000.0)) < 1e-6, true);
        }
    }

    #[test]
    fn exit_points_on_boundary() {
        let a = Airspace::default();
        let p = Vec3::new(1000.0, 2000.0, 0.0);
        let e = a.exit_point(p, 45.0 * DEG);
        assert!((e.y - a.length).abs() < 1e-6 || (e.x - a.width).abs() < 1e-6);
        let w = a.exit_point(p, -90.0 * DEG);
        assert!(w.x.abs() < 1e-9 && (w.y - 2000.0).abs() < 1e-6);
    }
}

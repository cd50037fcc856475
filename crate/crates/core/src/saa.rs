//! Sense-and-avoid: conflict detection by constant-velocity projection and
//! the two resolution laws (tangent "minimum deviation" SAA1 and radial
//! "safe distance" SAA2).
//!
//! Notation: own vehicle A (the UAS), intruder B. `r = p_B - p_A` and
//! `v_AB = v_A - v_B`, so a closing geometry has `r . v_AB > 0`.

use serde::{Deserialize, Serialize};

use crate::units::{nm, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaaLogic {
    Saa1,
    Saa2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaaConfig {
    /// Required miss distance R, m.
    pub miss_distance: f64,
    /// Look-ahead window, s.
    pub time_horizon: f64,
    /// Scan radius, m.
    pub distance_horizon: f64,
    pub logic: SaaLogic,
}

impl Default for SaaConfig {
    fn default() -> Self {
        Self {
            miss_distance: nm(5.0),
            time_horizon: 40.0,
            distance_horizon: nm(10.0),
            logic: SaaLogic::Saa1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl Kinematics {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        Self { position, velocity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictPrediction {
    pub t_min: f64,
    pub d_min: f64,
    /// Intruder position relative to own at closest approach.
    pub r_m: Vec3,
    pub intruder_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SaaError {
    #[error("singular geometry: inside the protected zone or line-of-sight closing")]
    SingularGeometry,
    #[error("degenerate geometry: predicted exact collision")]
    DegenerateGeometry,
}

/// Closest approach of the constant-velocity relative motion over
/// `[0, horizon]`: returns `(t_min, r_m)`.
pub fn closest_approach(own: &Kinematics, intruder: &Kinematics, horizon: f64) -> (f64, Vec3) {
    let r = intruder.position - own.position;
    let v = intruder.velocity - own.velocity;
    let vv = v.norm_sq();
    let t = if vv < 1e-18 { 0.0 } else { (-r.dot(v) / vv).clamp(0.0, horizon) };
    (t, r + v * t)
}

pub fn detect_conflict(
    own: &Kinematics,
    intruder: &Kinematics,
    intruder_id: usize,
    cfg: &SaaConfig,
) -> Option<ConflictPrediction> {
    if (intruder.position - own.position).norm() > cfg.distance_horizon {
        return None;
    }
    let (t_min, r_m) = closest_approach(own, intruder, cfg.time_horizon);
    let d_min = r_m.norm();
    (d_min < cfg.miss_distance).then_some(ConflictPrediction { t_min, d_min, r_m, intruder_id })
}

/// Earliest conflict; ties go to the smaller miss distance, then the
/// smaller intruder id.
pub fn select_conflict(predictions: &[ConflictPrediction]) -> Option<ConflictPrediction> {
    predictions.iter().copied().min_by(|a, b| {
        a.t_min
            .total_cmp(&b.t_min)
            .then(a.d_min.total_cmp(&b.d_min))
            .then(a.intruder_id.cmp(&b.intruder_id))
    })
}

/// Horizontal unit vector to the right of `v` (clockwise 90 degrees),
/// falling back to east when `v` is vertical or zero.
fn right_perpendicular(v: Vec3) -> Vec3 {
    Vec3::new(v.y, -v.x, 0.0).normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0))
}

/// SAA1 command, evaluated literally.
pub fn saa1_resolve(own: &Kinematics, intruder: &Kinematics, cfg: &SaaConfig) -> Result<Vec3, SaaError> {
    let r = intruder.position - own.position;
    let v_ab = own.velocity - intruder.velocity;
    let rn = r.norm();
    let vn = v_ab.norm();
    if rn <= cfg.miss_distance || vn < 1e-12 {
        return Err(SaaError::SingularGeometry);
    }
    let r_hat = r / rn;
    let v_hat = v_ab / vn;
    let zeta = r_hat.dot(v_hat).clamp(-1.0, 1.0).acos();
    if zeta.sin() < 1e-6 {
        return Err(SaaError::SingularGeometry);
    }
    let eta = (cfg.miss_distance / rn).asin();
    let k = vn * (eta - zeta).cos() / zeta.sin();
    Ok((v_hat * eta.sin() - r_hat * (eta - zeta).sin()) * k + intruder.velocity)
}

/// SAA1 with the line-of-sight case resolved: when the relative velocity is
/// aligned with the line of sight the deflection plane is the horizontal
/// plane and the turn is to the right. Inside the protected zone there is no
/// tangent, so the error is passed through.
pub fn saa1_resolve_with_fallback(own: &Kinematics, intruder: &Kinematics, cfg: &SaaConfig) -> Result<Vec3, SaaError> {
    match saa1_resolve(own, intruder, cfg) {
        Ok(v) => Ok(v),
        Err(e) => {
            let r = intruder.position - own.position;
            let v_ab = own.velocity - intruder.velocity;
            let rn = r.norm();
            let vn = v_ab.norm();
            if rn <= cfg.miss_distance || vn < 1e-12 {
                return Err(e);
            }
            let r_hat = r / rn;
            let cos_zeta = r_hat.dot(v_ab / vn).clamp(-1.0, 1.0);
            // Receding along the line of sight: nothing to resolve.
            if cos_zeta < 0.0 {
                return Ok(own.velocity);
            }
            let side = (v_ab - r_hat * v_ab.dot(r_hat)).normalized().unwrap_or_else(|| {
                let rp = right_perpendicular(r);
                (rp - r_hat * rp.dot(r_hat)).normalized().unwrap_or(rp)
            });
            let eta = (cfg.miss_distance / rn).asin();
            let zeta = cos_zeta.acos();
            let rel = (r_hat * eta.cos() + side * eta.sin()) * (vn * (eta - zeta).cos());
            Ok(rel + intruder.velocity)
        }
    }
}

/// SAA2 escape direction (unit vector): the UAS aims at its own predicted
/// position at closest approach, pushed away from the intruder by the
/// shortfall `R - |r_m|`.
///
/// The first term is `v_A * t_cpa` with `t_cpa = -(r0 . v_AB) / |v_AB|^2`,
/// where `r0 = p_A - p_B` runs from the intruder to the UAS, so it is
/// positive while closing and both terms are lengths.
pub fn saa2_resolve(
    own: &Kinematics,
    intruder: &Kinematics,
    cfg: &SaaConfig,
    pred: &ConflictPrediction,
) -> Result<Vec3, SaaError> {
    let r0 = own.position - intruder.position;
    let v_ab = own.velocity - intruder.velocity;
    let vv = v_ab.norm_sq();
    let t_cpa = if vv > 1e-18 { (-r0.dot(v_ab) / vv).max(0.0) } else { 0.0 };
    let rm_norm = pred.r_m.norm();
    if rm_norm <= 1e-9 {
        return Err(SaaError::DegenerateGeometry);
    }
    let cmd = own.velocity * t_cpa - pred.r_m / rm_norm * (cfg.miss_distance - rm_norm);
    cmd.normalized().ok_or(SaaError::DegenerateGeometry)
}

/// SAA2 with the exact-collision case resolved by escaping to the right of
/// the relative velocity in the horizontal plane.
pub fn saa2_resolve_with_fallback(
    own: &Kinematics,
    intruder: &Kinematics,
    cfg: &SaaConfig,
    pred: &ConflictPrediction,
) -> Vec3 {
    match saa2_resolve(own, intruder, cfg, pred) {
        Ok(v) => v,
        Err(_) => {
            let v_ab = own.velocity - intruder.velocity;
            let mut p = *pred;
            // Pretend the intruder passes marginally on the left of the
            // relative track, which yields a rightward escape.
            p.r_m = -right_perpendicular(v_ab) * 1e-3;
            saa2_resolve(own, intruder, cfg, &p).unwrap_or_else(|_| right_perpendicular(v_ab))
        }
    }
}

/// Commanded velocity for the UAS facing `pred`, at the given cruise speed
/// for SAA2. SAA1 falls back to SAA2 inside the protected zone.
pub fn resolve(
    own: &Kinematics,
    intruder: &Kinematics,
    cfg: &SaaConfig,
    pred: &ConflictPrediction,
    cruise_speed: f64,
) -> Vec3 {
    match cfg.logic {
        SaaLogic::Saa1 => match saa1_resolve_with_fallback(own, intruder, cfg) {
            Ok(v) => v,
            Err(_) => saa2_resolve_with_fallback(own, intruder, cfg, pred) * cruise_speed,
        },
        SaaLogic::Saa2 => saa2_resolve_with_fallback(own, intruder, cfg, pred) * cruise_speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::random_conflict;
    use crate::units::{knots, DEG};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(horizon: f64) -> SaaConfig {
        SaaConfig { time_horizon: horizon, distance_horizon: nm(1000.0), ..SaaConfig::default() }
    }

    /// Brute-force sampling oracle for the closest approach.
    fn sampled(own: &Kinematics, other: &Kinematics, horizon: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        let n = (horizon / 0.1).round() as usize;
        for i in 0..=n {
            let t = i as f64 * 0.1;
            let d = ((other.position + other.velocity * t) - (own.position + own.velocity * t)).norm();
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }

    #[test]
    fn parallel_tracks_no_conflict() {
        let v = Vec3::new(knots(300.0), 0.0, 0.0);
        let a = Kinematics::new(Vec3::ZERO, v);
        let b = Kinematics::new(Vec3::new(0.0, nm(8.0), 0.0), v);
        assert!(detect_conflict(&a, &b, 1, &cfg(120.0)).is_none());
    }

    #[test]
    fn head_on_conflict_time() {
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(knots(200.0), 0.0, 0.0));
        let b = Kinematics::new(Vec3::new(nm(10.0), 0.0, 0.0), Vec3::new(-knots(200.0), 0.0, 0.0));
        let p = detect_conflict(&a, &b, 7, &cfg(120.0)).unwrap();
        assert!((p.t_min - 90.0).abs() < 1e-9);
        assert!(p.d_min < 1e-6);
        let (ts, ds) = sampled(&a, &b, 120.0);
        assert!((ts - p.t_min).abs() <= 0.1 && ds < 1.0);
    }

    #[test]
    fn receding_no_conflict() {
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(-knots(200.0), 0.0, 0.0));
        let b = Kinematics::new(Vec3::new(nm(6.0), 0.0, 0.0), Vec3::new(knots(200.0), 0.0, 0.0));
        assert!(detect_conflict(&a, &b, 0, &cfg(600.0)).is_none());
        let (t, _) = closest_approach(&a, &b, 600.0);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn outside_scan_radius_ignored() {
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(knots(200.0), 0.0, 0.0));
        let b = Kinematics::new(Vec3::new(nm(11.0), 0.0, 0.0), Vec3::new(-knots(200.0), 0.0, 0.0));
        let c = SaaConfig { time_horizon: 600.0, ..SaaConfig::default() };
        assert!(detect_conflict(&a, &b, 0, &c).is_none());
    }

    #[test]
    fn select_earliest_then_closest_then_id() {
        let mk = |t, d, id| ConflictPrediction { t_min: t, d_min: d, r_m: Vec3::ZERO, intruder_id: id };
        assert!(select_conflict(&[]).is_none());
        assert_eq!(select_conflict(&[mk(30.0, 1.0, 0), mk(12.0, 2.0, 1)]).unwrap().intruder_id, 1);
        assert_eq!(select_conflict(&[mk(12.0, 3.0, 0), mk(12.0, 2.0, 1)]).unwrap().intruder_id, 1);
        assert_eq!(select_conflict(&[mk(12.0, 2.0, 4), mk(12.0, 2.0, 3)]).unwrap().intruder_id, 3);
    }

    #[test]
    fn saa1_commands_tangent_miss() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cfg(1e6);
        for _ in 0..1000 {
            let (a, b) = random_conflict(&mut rng);
            let v = saa1_resolve_with_fallback(&a, &b, &c).unwrap();
            let (_, rm) = closest_approach(&Kinematics::new(a.position, v), &b, 1e6);
            let ratio = rm.norm() / c.miss_distance;
            assert!((0.98..=1.02).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn saa1_literal_and_geometric_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = cfg(600.0);
        for _ in 0..200 {
            let (a, b) = random_conflict(&mut rng);
            let lit = saa1_resolve(&a, &b, &c).unwrap();
            // Rebuild the command from the tangent construction.
            let r = b.position - a.position;
            let v_ab = a.velocity - b.velocity;
            let r_hat = r.normalized().unwrap();
            let side = (v_ab - r_hat * v_ab.dot(r_hat)).normalized().unwrap();
            let eta = (c.miss_distance / r.norm()).asin();
            let zeta = r_hat.dot(v_ab.normalized().unwrap()).acos();
            let geo = (r_hat * eta.cos() + side * eta.sin()) * (v_ab.norm() * (eta - zeta).cos()) + b.velocity;
            assert!((lit - geo).norm() < 1e-6 * geo.norm().max(1.0));
        }
    }

    #[test]
    fn saa1_line_of_sight_deflects_by_eta() {
        let c = cfg(600.0);
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(0.0, 200.0, 0.0));
        let b = Kinematics::new(Vec3::new(0.0, 2.0 * c.miss_distance, 0.0), Vec3::ZERO);
        assert_eq!(saa1_resolve(&a, &b, &c), Err(SaaError::SingularGeometry));
        let v = saa1_resolve_with_fallback(&a, &b, &c).unwrap();
        let angle = v.normalized().unwrap().dot(Vec3::new(0.0, 1.0, 0.0)).acos();
        assert!((angle - 30.0 * DEG).abs() < 1e-9);
        assert!(v.x > 0.0, "turns right");
    }

    #[test]
    fn saa1_inside_zone_is_singular() {
        let c = cfg(600.0);
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(100.0, 200.0, 0.0));
        let b = Kinematics::new(Vec3::new(0.0, 0.5 * c.miss_distance, 0.0), Vec3::ZERO);
        assert_eq!(saa1_resolve(&a, &b, &c), Err(SaaError::SingularGeometry));
        assert_eq!(saa1_resolve_with_fallback(&a, &b, &c), Err(SaaError::SingularGeometry));
    }

    #[test]
    fn saa2_unit_norm_and_planar() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = cfg(600.0);
        for _ in 0..500 {
            let (mut a, mut b) = random_conflict(&mut rng);
            b.position.z = 0.0;
            b.velocity.z = 0.0;
            a.velocity.z = 0.0;
            let p = detect_conflict(&a, &b, 0, &c);
            let Some(p) = p else { continue };
            let v = saa2_resolve_with_fallback(&a, &b, &c, &p);
            assert!((v.norm() - 1.0).abs() < 1e-9);
            assert_eq!(v.z, 0.0);
        }
    }

    #[test]
    fn saa2_exact_collision_uses_fallback() {
        let c = cfg(600.0);
        let a = Kinematics::new(Vec3::ZERO, Vec3::new(0.0, 200.0, 0.0));
        let b = Kinematics::new(Vec3::new(0.0, nm(8.0), 0.0), Vec3::new(0.0, -200.0, 0.0));
        let p = detect_conflict(&a, &b, 0, &c).unwrap();
        assert_eq!(saa2_resolve(&a, &b, &c, &p), Err(SaaError::DegenerateGeometry));
        let v = saa2_resolve_with_fallback(&a, &b, &c, &p);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(v.x > 0.0 && v.y > 0.0);
    }

    #[test]
    fn saa2_closed_loop_keeps_distance() {
        let study = crate::validation::Saa2ClosedLoop::default();
        for seed in 0..200 {
            let ratio = study.min_distance_ratio(seed);
            assert!(ratio >= 0.95, "seed {seed}: {ratio}");
        }
    }

    fn rot(k: &Kinematics, a: f64) -> Kinematics {
        Kinematics::new(k.position.rotate_z(a), k.velocity.rotate_z(a))
    }

    proptest! {
        #[test]
        fn detector_matches_sampling(
            bx in -20.0..20.0f64, by in -20.0..20.0f64, ha in -3.2..3.2f64, hb in -3.2..3.2f64,
            sa in 150.0..550.0f64, sb in 150.0..550.0f64,
        ) {
            let a = Kinematics::new(Vec3::ZERO, Vec3::new(knots(sa) * ha.sin(), knots(sa) * ha.cos(), 0.0));
            let b = Kinematics::new(Vec3::new(nm(bx), nm(by), 0.0), Vec3::new(knots(sb) * hb.sin(), knots(sb) * hb.cos(), 0.0));
            let (t, rm) = closest_approach(&a, &b, 120.0);
            let (ts, ds) = sampled(&a, &b, 120.0);
            prop_assert!((t - ts).abs() <= 0.1 + 1e-9);
            prop_assert!(rm.norm() <= ds + 1e-6);
        }

        #[test]
        fn resolvers_are_rotation_consistent(seed in 0u64..1000, angle in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = random_conflict(&mut rng);
            let c = cfg(600.0);
            let (ar, br) = (rot(&a, angle), rot(&b, angle));
            let v1 = saa1_resolve_with_fallback(&a, &b, &c).unwrap();
            let v1r = saa1_resolve_with_fallback(&ar, &br, &c).unwrap();
            prop_assert!((v1.rotate_z(angle) - v1r).norm() < 1e-6 * v1.norm().max(1.0));
            let p = detect_conflict(&a, &b, 0, &c).unwrap();
            let pr = detect_conflict(&ar, &br, 0, &c).unwrap();
            let v2 = saa2_resolve_with_fallback(&a, &b, &c, &p);
            let v2r = saa2_resolve_with_fallback(&ar, &br, &c, &pr);
            prop_assert!((v2.rotate_z(angle) - v2r).norm() < 1e-6);
        }
    }
}

//! Desk-scale studies. Each study trains (or loads) the pilot models it
//! needs, runs its conditions over seeded replicates and checks the outcome
//! against thresholds carried by its [`StudySpec`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::PilotAction;
use crate::engine::metrics::ScenarioMetrics;
use crate::engine::scenario::{CrowdedSpec, EncounterGeometry, Scenario};
use crate::engine::sweep::{replicate_seed, run_replicate, run_sweep, summarize, CellSummary, ScenarioSource, SweepAxis, SweepSpec};
use crate::engine::{encounter_duration, run_with, EngineError, Responsibility, RunOptions, SimConfig};
use crate::learning::derive_seed;
use crate::learning::persistence::Mode;
use crate::learning::LearnParams;
use crate::levelk::store::{ModelKey, PolicyStore, StoreError};
use crate::levelk::{PilotPolicy, PolicySet};
use crate::saa::SaaLogic;
use crate::units::nm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl StudyId {
    pub const ALL: [StudyId; 6] = [StudyId::S1, StudyId::S2, StudyId::S3, StudyId::S4, StudyId::S5, StudyId::S6];

    pub fn tag(self) -> &'static str {
        match self {
            StudyId::S1 => "s1",
            StudyId::S2 => "s2",
            StudyId::S3 => "s3",
            StudyId::S4 => "s4",
            StudyId::S5 => "s5",
            StudyId::S6 => "s6",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            StudyId::S1 => "Single encounters by pilot level",
            StudyId::S2 => "Dynamic versus static level-k",
            StudyId::S3 => "Reward safety-ratio sensitivity",
            StudyId::S4 => "SAA horizon grid",
            StudyId::S5 => "Conflict-resolution responsibility",
            StudyId::S6 => "Number of UAS",
        }
    }

    /// Acceptance criteria the study feeds.
    pub fn criteria(self) -> &'static [&'static str] {
        match self {
            StudyId::S1 => &["5a"],
            StudyId::S2 => &["5b", "6"],
            StudyId::S3 => &["5c"],
            StudyId::S4 => &["5e"],
            StudyId::S5 => &["5d"],
            StudyId::S6 => &["5d"],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.tag().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest acceptable level-1 versus level-0 violation rate.
    pub max_violation_rate: f64,
    /// Significance level of one-sided proportion tests.
    pub significance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { max_violation_rate: 0.25, significance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub id: StudyId,
    /// Seeds both the training runs and the replicates.
    pub seed: u64,
    /// Encounters per condition (S1-S3) or replicates per cell (S4-S6).
    pub replicates: usize,
    pub thresholds: Thresholds,
    pub learning_2d: LearnParams,
    pub learning_3d: LearnParams,
    pub encounter: EncounterGeometry,
    /// S1 pilot distance horizons, nm; the largest is the gated one.
    pub pilot_horizons_nm: Vec<f64>,
    /// S3 safety/performance ratios.
    pub safety_ratios: Vec<f64>,
    /// S4 grid.
    pub saa_distance_horizons_nm: Vec<f64>,
    pub saa_time_horizons_s: Vec<f64>,
    /// S6 UAS counts.
    pub uas_counts: Vec<usize>,
    /// Crowded scenario of S4-S6; the mode is set per study.
    pub crowded: CrowdedSpec,
    /// Depth of the exhaustive search that labels S1 violations
    /// unresolvable (0 disables it).
    pub unresolvable_depth: usize,
}

impl StudySpec {
    /// Desk-scale defaults.
    pub fn desk(id: StudyId) -> Self {
        let replicates = match id {
            StudyId::S1 | StudyId::S2 => 500,
            StudyId::S3 => 200,
            _ => 20,
        };
        Self {
            id,
            seed: 1,
            replicates,
            thresholds: Thresholds::default(),
            learning_2d: LearnParams::for_mode(Mode::Planar),
            learning_3d: LearnParams::for_mode(Mode::Spatial),
            encounter: EncounterGeometry::default(),
            pilot_horizons_nm: vec![5.0, 10.0],
            safety_ratios: vec![0.5, 1.0, 2.0, 4.0],
            saa_distance_horizons_nm: vec![5.0, 7.5, 10.0],
            saa_time_horizons_s: vec![20.0, 40.0],
            uas_counts: vec![1, 2, 3],
            crowded: CrowdedSpec { dynamic_levels: true, ..CrowdedSpec::default() },
            unresolvable_depth: 2,
        }
    }

    fn learning(&self, mode: Mode) -> LearnParams {
        match mode {
            Mode::Planar => self.learning_2d,
            Mode::Spatial => self.learning_3d,
        }
    }

    fn key(&self, mode: Mode, sim: &SimConfig) -> ModelKey {
        ModelKey { level: 1, mode, sim: *sim, learning: self.learning(mode), seed: self.seed }
    }

    /// Master seed of the evaluation replicates, kept apart from training.
    fn replicate_master(&self) -> u64 {
        derive_seed(self.seed, 0xE7A1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("study {0} needs at least one value on each of its grids")]
    EmptyGrid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but do not fail the study.
    pub gating: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub condition: String,
    pub metric: String,
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub id: StudyId,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl StudyReport {
    fn new(id: StudyId) -> Self {
        Self { id, rows: Vec::new(), checks: Vec::new(), notes: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn value(&self, condition: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.condition == condition && r.metric == metric).map(|r| r.value)
    }

    fn row(&mut self, condition: impl Into<String>, metric: &str, n: usize, value: f64, stderr: f64) {
        self.rows.push(ReportRow { condition: condition.into(), metric: metric.to_string(), n, value, stderr });
    }

    fn gate(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, gating: true, detail });
    }

    fn inform(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, gating: false, detail });
    }

    /// Long-format table: one line per condition and metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("study,condition,metric,n,value,stderr\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", self.id.tag(), r.condition, r.metric, r.n, r.value, r.stderr);
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# {} {}\n\nCriteria: {}\n\n", self.id.tag().to_uppercase(), self.id.title(), self.id.criteria().join(", "));
        s.push_str("| condition | metric | n | value | stderr |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {} | {:.4} | {:.4} |", r.condition, r.metric, r.n, r.value, r.stderr);
        }
        s.push_str("\n## Checks\n\n");
        for c in &self.checks {
            let verdict = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            let _ = writeln!(s, "- {verdict} {}: {}", c.name, c.detail);
        }
        if !self.notes.is_empty() {
            s.push_str("\n## Notes\n\n");
            for n in &self.notes {
                let _ = writeln!(s, "- {n}");
            }
        }
        let _ = writeln!(s, "\nOverall: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

pub fn run_study(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    match spec.id {
        StudyId::S1 => study_levels(spec, store),
        StudyId::S2 => study_dynamic(spec, store),
        StudyId::S3 => study_ratio(spec, store),
        StudyId::S4 => study_horizons(spec, store),
        StudyId::S5 => study_responsibility(spec, store),
        StudyId::S6 => study_uas_count(spec, store),
    }
}

/// Share of runs with at least one violation, and its standard error.
pub fn violation_rate(runs: &[ScenarioMetrics]) -> (f64, f64) {
    let n = runs.len().max(1) as f64;
    let p = runs.iter().filter(|m| m.separation_violations > 0).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// One-sided two-proportion z-test of `x1/n1 < x2/n2` with the pooled
/// variance. Returns (z, p).
pub fn two_proportion_z(x1: usize, n1: usize, x2: usize, n2: usize) -> (f64, f64) {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return (0.0, if p1 < p2 { 0.0 } else { 1.0 });
    }
    let z = (p2 - p1) / se;
    let normal = Normal::standard();
    (z, 1.0 - normal.cdf(z))
}

fn encounter(spec: &StudySpec, mode: Mode, levels: [u8; 2], dynamic: bool) -> ScenarioSource {
    ScenarioSource::Encounter { mode, levels, dynamic, approach_deg: None, geometry: spec.encounter }
}

fn evaluate(spec: &StudySpec, source: &ScenarioSource, cfg: &SimConfig, set: &PolicySet) -> Result<Vec<ScenarioMetrics>, EngineError> {
    let master = spec.replicate_master();
    crate::par::map_range(spec.replicates, |i| run_replicate(source, cfg, None, set, replicate_seed(master, i)).map(|o| o.metrics))
        .into_iter()
        .collect()
}

fn levels_label(levels: [u8; 2], dynamic: bool) -> String {
    format!("{}L{}-L{}", if dynamic { "dyn " } else { "" }, levels[0], levels[1])
}

fn study_levels(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mode = Mode::Spatial;
    let mut horizons = spec.pilot_horizons_nm.clone();
    horizons.sort_by(f64::total_cmp);
    let (&lo, &hi) = horizons.first().zip(horizons.last()).ok_or(StudyError::EmptyGrid("s1"))?;
    let mut report = StudyReport::new(StudyId::S1);
    let mut l1l0 = Vec::new();
    let mut gated_runs = Vec::new();
    let mut baseline = (0.0, 0.0);
    for &h in &horizons {
        let cfg = SimConfig { pilot_distance_horizon: nm(h), ..SimConfig::for_mode(mode) };
        let gated = h == hi;
        let pairs: &[[u8; 2]] = if gated { &[[0, 0], [1, 0], [2, 1], [1, 1], [2, 2]] } else { &[[0, 0], [1, 0]] };
        let set = store.policy_set(&spec.key(mode, &cfg), if gated { &[1, 2] } else { &[1] })?;
        for &levels in pairs {
            let runs = evaluate(spec, &encounter(spec, mode, levels, false), &cfg, &set)?;
            let (p, se) = violation_rate(&runs);
            report.row(format!("{} @{h}nm", levels_label(levels, false)), "violation_rate", runs.len(), p, se);
            if levels == [1, 0] {
                l1l0.push((h, p));
                if gated {
                    gated_runs = runs;
                }
            } else if levels == [0, 0] && gated {
                baseline = (p, se);
            }
        }
    }
    let p_hi = l1l0.last().map_or(f64::NAN, |x| x.1);
    let p_lo = l1l0.first().map_or(f64::NAN, |x| x.1);
    report.gate(
        "level-1 vs level-0 rate",
        p_hi <= spec.thresholds.max_violation_rate,
        format!("{p_hi:.3} at {hi} nm, limit {:.2}", spec.thresholds.max_violation_rate),
    );
    report.gate("below no-maneuver baseline", p_hi < baseline.0, format!("{p_hi:.3} vs baseline {:.3}", baseline.0));
    if horizons.len() > 1 {
        report.gate("longer horizon is safer", p_hi < p_lo, format!("{p_hi:.3} at {hi} nm vs {p_lo:.3} at {lo} nm"));
    }

    if spec.unresolvable_depth > 0 {
        let cfg = SimConfig { pilot_distance_horizon: nm(hi), ..SimConfig::for_mode(mode) };
        let source = encounter(spec, mode, [1, 0], false);
        let master = spec.replicate_master();
        let violating: Vec<usize> = (0..gated_runs.len()).filter(|&i| gated_runs[i].separation_violations > 0).collect();
        let flags = crate::par::map_slice(&violating, |&i| {
            let seed = replicate_seed(master, i);
            let mut run_cfg = SimConfig { seed, ..cfg };
            let sc = source.build(&run_cfg, None, seed)?;
            run_cfg.max_time = run_cfg.max_time.min(encounter_duration(&sc));
            unresolvable(&sc, &run_cfg, spec.unresolvable_depth)
        });
        let flags = flags.into_iter().collect::<Result<Vec<bool>, EngineError>>()?;
        let k = flags.iter().filter(|f| **f).count();
        let n = gated_runs.len().max(1);
        report.row(format!("L1-L0 @{hi}nm"), "unresolvable_share", n, k as f64 / n as f64, 0.0);
        report.notes.push(format!(
            "{k} of {} violating level-1 vs level-0 encounters admit no violation-free pair of depth-{} action sequences",
            violating.len(),
            spec.unresolvable_depth
        ));
    }
    Ok(report)
}

/// True when no combination of both pilots' first `depth` decisions after
/// they come within their distance horizon avoids a separation violation.
/// Later decisions are Straight.
pub fn unresolvable(sc: &Scenario, cfg: &SimConfig, depth: usize) -> Result<bool, EngineError> {
    let actions: &[PilotAction] = match sc.mode {
        Mode::Planar => &PilotAction::PLANAR,
        Mode::Spatial => &PilotAction::ALL,
    };
    let mut sc = sc.clone();
    sc.set_pilots(&[PilotPolicy::External, PilotPolicy::External]);
    let per_agent = actions.len().pow(depth as u32);
    let horizon = cfg.pilot_distance_horizon;
    for joint in 0..per_agent * per_agent {
        let plan = [joint / per_agent, joint % per_agent];
        let mut made = [0usize; 2];
        let out = run_with(&sc, cfg, &PolicySet::default(), RunOptions::default(), &mut |ctx| {
            let near = ctx.traffic.iter().any(|t| (t.position - ctx.own.position).norm() <= horizon);
            let k = made[ctx.agent];
            if !(near || k > 0) || k >= depth {
                return PilotAction::Straight;
            }
            made[ctx.agent] += 1;
            let code = plan[ctx.agent] / actions.len().pow((depth - 1 - k) as u32) % actions.len();
            actions[code]
        })?;
        if out.metrics.separation_violations == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn study_dynamic(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mode = Mode::Spatial;
    let cfg = SimConfig::for_mode(mode);
    let set = store.policy_set(&spec.key(mode, &cfg), &[1, 2])?;
    let mut report = StudyReport::new(StudyId::S2);
    let static_runs = evaluate(spec, &encounter(spec, mode, [1, 1], false), &cfg, &set)?;
    let dynamic_runs = evaluate(spec, &encounter(spec, mode, [1, 1], true), &cfg, &set)?;
    let count = |r: &[ScenarioMetrics]| r.iter().filter(|m| m.separation_violations > 0).count();
    let (xs, xd) = (count(&static_runs), count(&dynamic_runs));
    for (label, runs) in [("L1-L1", &static_runs), ("dyn L1-L1", &dynamic_runs)] {
        let (p, se) = violation_rate(runs);
        report.row(label, "violation_rate", runs.len(), p, se);
        let switches = runs.iter().map(|m| m.level_switches as f64).collect::<Vec<_>>();
        let (m, s) = crate::engine::sweep::mean_stderr(&switches);
        report.row(label, "level_switches", runs.len(), m, s);
    }
    let (z, p) = two_proportion_z(xd, dynamic_runs.len(), xs, static_runs.len());
    report.row("dyn vs static", "z", static_runs.len() + dynamic_runs.len(), z, 0.0);
    report.row("dyn vs static", "p_one_sided", static_runs.len() + dynamic_runs.len(), p, 0.0);
    report.gate(
        "dynamic below static",
        xd < xs && p < spec.thresholds.significance,
        format!("{xd} vs {xs} violating encounters of {}, z = {z:.2}, p = {p:.4}", static_runs.len()),
    );
    Ok(report)
}

fn study_ratio(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mode = Mode::Planar;
    if spec.safety_ratios.is_empty() {
        return Err(StudyError::EmptyGrid("s3"));
    }
    let mut report = StudyReport::new(StudyId::S3);
    let mut counts = Vec::new();
    for &r in &spec.safety_ratios {
        let base = SimConfig::for_mode(mode);
        let weights = base.weights_2d.with_safety_ratio(r).map_err(|e| EngineError::Config(e.to_string()))?;
        let cfg = SimConfig { weights_2d: weights, ..base };
        let set = store.policy_set(&spec.key(mode, &cfg), &[1])?;
        let runs = evaluate(spec, &encounter(spec, mode, [1, 0], false), &cfg, &set)?;
        let violations: u32 = runs.iter().map(|m| m.separation_violations).sum();
        let (p, se) = violation_rate(&runs);
        let label = format!("r={r}");
        report.row(label.clone(), "violations", runs.len(), violations as f64, 0.0);
        report.row(label.clone(), "violation_rate", runs.len(), p, se);
        let min_h: Vec<f64> = runs.iter().map(|m| m.min_horizontal_nm).collect();
        let (m, s) = crate::engine::sweep::mean_stderr(&min_h);
        report.row(label.clone(), "min_horizontal_nm", runs.len(), m, s);
        let dev: Vec<f64> = runs.iter().map(|m| m.manned_traj_deviation_mean).collect();
        let (m, s) = crate::engine::sweep::mean_stderr(&dev);
        report.row(label, "manned_traj_deviation_nm", runs.len(), m, s);
        counts.push((r, violations));
    }
    let mut sorted = counts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ok = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    let listing = sorted.iter().map(|(r, v)| format!("r={r}: {v}")).collect::<Vec<_>>().join(", ");
    report.gate("violations non-increasing in r", ok, listing);
    Ok(report)
}

fn crowded(spec: &StudySpec, mode: Mode) -> ScenarioSource {
    ScenarioSource::Crowded(CrowdedSpec { mode, ..spec.crowded })
}

fn crowded_sweep(
    spec: &StudySpec,
    store: &mut PolicyStore,
    mode: Mode,
    base: SimConfig,
    axes: Vec<SweepAxis>,
) -> Result<Vec<CellSummary>, StudyError> {
    let set = store.policy_set(&spec.key(mode, &base), &[1, 2])?;
    let sweep = SweepSpec { axes, seeds: spec.replicates };
    let base = SimConfig { seed: spec.replicate_master(), ..base };
    let rows = run_sweep(&crowded(spec, mode), &base, &sweep, &mut |_| Ok(set.clone()))?;
    Ok(summarize(&rows))
}

fn settings_label(c: &CellSummary) -> String {
    c.settings.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn push_summaries(report: &mut StudyReport, prefix: &str, cells: &[CellSummary], metrics: &[&str]) {
    for c in cells.iter().filter(|c| metrics.contains(&c.metric)) {
        let label = if prefix.is_empty() { settings_label(c) } else { format!("{prefix} {}", settings_label(c)) };
        report.row(label, c.metric, c.n, c.mean, c.stderr);
    }
}

fn cell_mean(cells: &[CellSummary], metric: &str, settings: &[(&str, &str)]) -> f64 {
    cells
        .iter()
        .find(|c| c.metric == metric && settings.iter().all(|(k, v)| c.settings.iter().any(|(ck, cv)| ck == k && cv == v)))
        .map_or(f64::NAN, |c| c.mean)
}

fn study_horizons(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mode = Mode::Planar;
    if spec.saa_distance_horizons_nm.is_empty() || spec.saa_time_horizons_s.is_empty() {
        return Err(StudyError::EmptyGrid("s4"));
    }
    let mut base = SimConfig::for_mode(mode);
    base.saa.logic = SaaLogic::Saa1;
    base.responsibility = Responsibility::Shared;
    let axes = vec![
        SweepAxis::TimeHorizon(spec.saa_time_horizons_s.clone()),
        SweepAxis::DistanceHorizon(spec.saa_distance_horizons_nm.clone()),
    ];
    let cells = crowded_sweep(spec, store, mode, base, axes)?;
    let mut report = StudyReport::new(StudyId::S4);
    push_summaries(&mut report, "", &cells, &["uas_traj_deviation_nm", "separation_violations", "uas_manned_violations", "uas_flight_time_s"]);
    let mut distances = spec.saa_distance_horizons_nm.clone();
    distances.sort_by(f64::total_cmp);
    for th in &spec.saa_time_horizons_s {
        let th_label = th.to_string();
        let devs: Vec<f64> = distances
            .iter()
            .map(|d| cell_mean(&cells, "uas_traj_deviation_nm", &[("time_horizon_s", &th_label), ("distance_horizon_nm", &d.to_string())]))
            .collect();
        let ok = devs.windows(2).all(|w| w[1] >= w[0]);
        let listing = distances.iter().zip(&devs).map(|(d, v)| format!("{d} nm: {v:.3}")).collect::<Vec<_>>().join(", ");
        report.gate(&format!("UAS deviation non-decreasing in distance horizon (time horizon {th} s)"), ok, listing);
    }
    Ok(report)
}

fn study_responsibility(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mut report = StudyReport::new(StudyId::S5);
    let logics = [SaaLogic::Saa1, SaaLogic::Saa2];
    for mode in [Mode::Planar, Mode::Spatial] {
        let axes = vec![SweepAxis::SaaLogic(logics.to_vec()), SweepAxis::Responsibility(Responsibility::ALL.to_vec())];
        let cells = crowded_sweep(spec, store, mode, SimConfig::for_mode(mode), axes)?;
        push_summaries(
            &mut report,
            mode.tag(),
            &cells,
            &["separation_violations", "uas_manned_violations", "manned_traj_deviation_nm", "uas_traj_deviation_nm", "uas_flight_time_s"],
        );
        for logic in logics {
            let tag = match logic {
                SaaLogic::Saa1 => "1",
                SaaLogic::Saa2 => "2",
            };
            let v = |r: Responsibility| cell_mean(&cells, "separation_violations", &[("saa", tag), ("responsibility", r.tag())]);
            let (m, u, s) = (v(Responsibility::MannedOnly), v(Responsibility::UasOnly), v(Responsibility::Shared));
            let detail = format!("manned {m:.2}, uas {u:.2}, shared {s:.2}");
            match mode {
                Mode::Planar => report.gate(&format!("2d SAA{tag}: UAS-only is safest"), u < m && u < s, detail),
                Mode::Spatial => {
                    report.gate(&format!("3d SAA{tag}: shared no worse than manned-only"), s <= m, detail.clone());
                    report.inform(&format!("3d SAA{tag}: shared is safest"), s <= m && s <= u, detail);
                }
            }
        }
    }
    Ok(report)
}

fn study_uas_count(spec: &StudySpec, store: &mut PolicyStore) -> Result<StudyReport, StudyError> {
    let mode = Mode::Planar;
    if spec.uas_counts.is_empty() {
        return Err(StudyError::EmptyGrid("s6"));
    }
    let mut base = SimConfig::for_mode(mode);
    base.responsibility = Responsibility::Shared;
    let cells = crowded_sweep(spec, store, mode, base, vec![SweepAxis::UasCount(spec.uas_counts.clone())])?;
    let mut report = StudyReport::new(StudyId::S6);
    push_summaries(
        &mut report,
        "",
        &cells,
        &["separation_violations", "uas_manned_violations", "uas_traj_deviation_nm", "manned_traj_deviation_nm", "level_switches"],
    );
    let mut counts = spec.uas_counts.clone();
    counts.sort_unstable();
    let um: Vec<f64> = counts.iter().map(|c| cell_mean(&cells, "uas_manned_violations", &[("uas_count", &c.to_string())])).collect();
    let listing = counts.iter().zip(&um).map(|(c, v)| format!("{c} UAS: {v:.2}")).collect::<Vec<_>>().join(", ");
    report.inform("UAS-manned violations grow with UAS count", um.windows(2).all(|w| w[1] >= w[0]), listing);
    report.notes.push("Level switches per run are listed as the counterpart of the qualitative mode changes; no gate applies.".into());
    Ok(report)
}

//! Parameter sweeps: the Cartesian product of the swept axes, each cell run
//! over the same replicate seeds, written as long-format CSV.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{self, CrowdedSpec, EncounterGeometry, Scenario, ScenarioError};
use super::{encounter_duration, run, EngineError, Responsibility, RunOptions, ScenarioMetrics, SimConfig};
use crate::learning::derive_seed;
use crate::learning::persistence::Mode;
use crate::levelk::{assign_crowded_levels, PilotPolicy, PolicySet};
use crate::saa::SaaLogic;
use crate::units::nm;

/// Pilot level as written in configs: 0, 1 or 2.
fn pilot_for(level: u8, dynamic: bool) -> Result<PilotPolicy, ScenarioError> {
    match level {
        0 => Ok(PilotPolicy::Level0),
        k => PilotPolicy::learned(k, dynamic).map_err(|e| ScenarioError::Parse { line: 0, message: e.to_string() }),
    }
}

/// Where the traffic of each run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSource {
    /// Two aircraft on a generated collision course. Without an approach
    /// angle one is drawn uniformly from [45, 180] degrees per run.
    Encounter {
        mode: Mode,
        levels: [u8; 2],
        #[serde(default)]
        dynamic: bool,
        #[serde(default)]
        approach_deg: Option<f64>,
        #[serde(default)]
        geometry: EncounterGeometry,
    },
    /// One of the two fixed 3D sample encounters.
    Sample {
        which: u8,
        levels: [u8; 2],
        #[serde(default)]
        dynamic: bool,
    },
    Crowded(CrowdedSpec),
    /// Snapshot files; pilots get the crowded level mix.
    File {
        mode: Mode,
        manned: PathBuf,
        #[serde(default)]
        uas: Option<PathBuf>,
        #[serde(default)]
        dynamic_levels: bool,
    },
}

impl ScenarioSource {
    pub fn mode(&self) -> Mode {
        match self {
            ScenarioSource::Encounter { mode, .. } | ScenarioSource::File { mode, .. } => *mode,
            ScenarioSource::Sample { .. } => Mode::Spatial,
            ScenarioSource::Crowded(c) => c.mode,
        }
    }

    /// Builds the scenario of one run. `uas_count` overrides the crowded
    /// UAS count.
    pub fn build(&self, cfg: &SimConfig, uas_count: Option<usize>, seed: u64) -> Result<Scenario, ScenarioError> {
        match self {
            ScenarioSource::Encounter { mode, levels, dynamic, approach_deg, geometry } => {
                let pilots = [pilot_for(levels[0], *dynamic)?, pilot_for(levels[1], *dynamic)?];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xA9));
                let angle = approach_deg.unwrap_or_else(|| rng.gen_range(45.0..=180.0));
                if !(angle > 0.0 && angle <= 180.0) {
                    return Err(ScenarioError::Parse { line: 0, message: format!("approach angle {angle} outside (0, 180]") });
                }
                Ok(scenario::generate_single_encounter(*mode, angle, pilots, cfg.pilot_distance_horizon, geometry, seed))
            }
            ScenarioSource::Sample { which, levels, dynamic } => {
                let pilots = [pilot_for(levels[0], *dynamic)?, pilot_for(levels[1], *dynamic)?];
                match which {
                    1 => Ok(scenario::sample_encounter_1(pilots)),
                    2 => Ok(scenario::sample_encounter_2(pilots)),
                    w => Err(ScenarioError::Parse { line: 0, message: format!("there is no sample encounter {w}") }),
                }
            }
            ScenarioSource::Crowded(spec) => {
                let spec = CrowdedSpec { n_uas: uas_count.unwrap_or(spec.n_uas), ..*spec };
                Ok(scenario::crowded_scenario(&spec, seed))
            }
            ScenarioSource::File { mode, manned, uas, dynamic_levels } => {
                let mut sc = scenario::load_scenario(manned, *mode, uas.as_deref(), super::Airspace::default())?;
                let pilots = assign_crowded_levels(sc.manned.len(), seed, *dynamic_levels);
                sc.set_pilots(&pilots);
                Ok(sc)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// Safety-to-performance weight ratio of the 2D reward.
    SafetyRatio(Vec<f64>),
    /// SAA distance horizon, nm.
    DistanceHorizon(Vec<f64>),
    /// SAA time horizon, s.
    TimeHorizon(Vec<f64>),
    Responsibility(Vec<Responsibility>),
    SaaLogic(Vec<SaaLogic>),
    UasCount(Vec<usize>),
    /// Pilot distance horizon, nm.
    PilotHorizon(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SafetyRatio(_) => "safety_ratio",
            SweepAxis::DistanceHorizon(_) => "distance_horizon_nm",
            SweepAxis::TimeHorizon(_) => "time_horizon_s",
            SweepAxis::Responsibility(_) => "responsibility",
            SweepAxis::SaaLogic(_) => "saa",
            SweepAxis::UasCount(_) => "uas_count",
            SweepAxis::PilotHorizon(_) => "pilot_horizon_nm",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::SafetyRatio(v) | SweepAxis::DistanceHorizon(v) | SweepAxis::TimeHorizon(v) | SweepAxis::PilotHorizon(v) => v.len(),
            SweepAxis::Responsibility(v) => v.len(),
            SweepAxis::SaaLogic(v) => v.len(),
            SweepAxis::UasCount(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> String {
        match self {
            SweepAxis::SafetyRatio(v) | SweepAxis::DistanceHorizon(v) | SweepAxis::TimeHorizon(v) | SweepAxis::PilotHorizon(v) => v[i].to_string(),
            SweepAxis::Responsibility(v) => v[i].tag().to_string(),
            SweepAxis::SaaLogic(v) => match v[i] {
                SaaLogic::Saa1 => "1".into(),
                SaaLogic::Saa2 => "2".into(),
            },
            SweepAxis::UasCount(v) => v[i].to_string(),
        }
    }

    fn apply(&self, i: usize, cell: &mut SweepCell) -> Result<(), EngineError> {
        let cfg = &mut cell.cfg;
        match self {
            SweepAxis::SafetyRatio(v) => {
                cfg.weights_2d = cfg.weights_2d.with_safety_ratio(v[i]).map_err(|e| EngineError::Config(e.to_string()))?
            }
            SweepAxis::DistanceHorizon(v) => cfg.saa.distance_horizon = nm(v[i]),
            SweepAxis::TimeHorizon(v) => cfg.saa.time_horizon = v[i],
            SweepAxis::Responsibility(v) => cfg.responsibility = v[i],
            SweepAxis::SaaLogic(v) => cfg.saa.logic = v[i],
            SweepAxis::UasCount(v) => cell.uas_count = Some(v[i]),
            SweepAxis::PilotHorizon(v) => cfg.pilot_distance_horizon = nm(v[i]),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    /// Replicates per cell.
    pub seeds: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { axes: Vec::new(), seeds: 20 }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    /// (axis name, value label) in axis order.
    pub settings: Vec<(&'static str, String)>,
    pub cfg: SimConfig,
    pub uas_count: Option<usize>,
}

impl SweepSpec {
    pub fn cells(&self, base: &SimConfig) -> Result<Vec<SweepCell>, EngineError> {
        if self.axes.iter().any(|a| a.is_empty()) {
            return Err(EngineError::Config("a sweep axis has no values".into()));
        }
        let total: usize = self.axes.iter().map(|a| a.len()).product();
        let mut out = Vec::with_capacity(total);
        for index in 0..total {
            let mut cell = SweepCell { index, settings: Vec::new(), cfg: *base, uas_count: None };
            // Last axis varies fastest.
            let mut rest = index;
            let mut picks = vec![0; self.axes.len()];
            for (k, axis) in self.axes.iter().enumerate().rev() {
                picks[k] = rest % axis.len();
                rest /= axis.len();
            }
            for (axis, &i) in self.axes.iter().zip(&picks) {
                axis.apply(i, &mut cell)?;
                cell.settings.push((axis.name(), axis.label(i)));
            }
            out.push(cell);
        }
        Ok(out)
    }
}

/// Seed of replicate `rep`; every cell uses the same replicate seeds.
pub fn replicate_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    pub settings: Vec<(&'static str, String)>,
    pub rep: usize,
    pub seed: u64,
    pub metrics: ScenarioMetrics,
}

/// Runs one replicate exactly as a sweep would.
pub fn run_replicate(source: &ScenarioSource, cfg: &SimConfig, uas_count: Option<usize>, policies: &PolicySet, seed: u64) -> Result<super::RunOutput, EngineError> {
    run_replicate_with(source, cfg, uas_count, policies, seed, RunOptions::default())
}

pub fn run_replicate_with(
    source: &ScenarioSource,
    cfg: &SimConfig,
    uas_count: Option<usize>,
    policies: &PolicySet,
    seed: u64,
    opts: RunOptions,
) -> Result<super::RunOutput, EngineError> {
    let sc = source.build(cfg, uas_count, seed)?;
    let mut cfg = SimConfig { seed, ..*cfg };
    if sc.encounter_time.is_some() {
        cfg.max_time = cfg.max_time.min(encounter_duration(&sc));
    }
    run(&sc, &cfg, policies, opts)
}

/// Runs every (cell, replicate) pair in parallel. `policies` supplies the
/// pilot models for a cell's configuration.
pub fn run_sweep(
    source: &ScenarioSource,
    base: &SimConfig,
    spec: &SweepSpec,
    policies: &mut dyn FnMut(&SweepCell) -> Result<PolicySet, EngineError>,
) -> Result<Vec<SweepRow>, EngineError> {
    let cells = spec.cells(base)?;
    let sets = cells.iter().map(|c| policies(c)).collect::<Result<Vec<_>, _>>()?;
    let jobs = cells.len() * spec.seeds;
    let results = crate::par::map_range(jobs, |j| {
        let (c, rep) = (j / spec.seeds, j % spec.seeds);
        let seed = replicate_seed(base.seed, rep);
        run_replicate(source, &cells[c].cfg, cells[c].uas_count, &sets[c], seed).map(|out| SweepRow {
            cell: c,
            settings: cells[c].settings.clone(),
            rep,
            seed,
            metrics: out.metrics,
        })
    });
    results.into_iter().collect()
}

/// Scalar metric columns of the long-format table, in output order.
pub const METRIC_COLUMNS: [&str; 10] = [
    "separation_violations",
    "uas_manned_violations",
    "manned_manned_violations",
    "collision_count",
    "manned_traj_deviation_nm",
    "uas_traj_deviation_nm",
    "uas_flight_time_s",
    "min_horizontal_nm",
    "level_switches",
    "sim_time_s",
];

pub fn metric_values(m: &ScenarioMetrics) -> [f64; 10] {
    [
        m.separation_violations as f64,
        m.uas_manned_violations as f64,
        m.manned_manned_violations as f64,
        m.collision_count as f64,
        m.manned_traj_deviation_mean,
        m.uas_traj_deviation_mean(),
        m.uas_flight_time_mean(),
        m.min_horizontal_nm,
        m.level_switches as f64,
        m.sim_time,
    ]
}

/// Column names: cell, the axes, replicate, seed, then the metrics.
pub fn csv_header(axes: &[&str]) -> String {
    let mut h = String::from("cell");
    for a in axes {
        h += ",";
        h += a;
    }
    h += ",rep,seed";
    for m in METRIC_COLUMNS {
        h += ",";
        h += m;
    }
    h
}

pub fn rows_to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let names: Vec<&str> = spec.axes.iter().map(|a| a.name()).collect();
    let mut out = csv_header(&names);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.cell);
        for (_, v) in &r.settings {
            let _ = write!(out, ",{v}");
        }
        let _ = write!(out, ",{},{}", r.rep, r.seed);
        for v in metric_values(&r.metrics) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Mean and standard error of one metric in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub settings: Vec<(&'static str, String)>,
    pub metric: &'static str,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let n_cells = rows.iter().map(|r| r.cell + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for c in 0..n_cells {
        let cell: Vec<&SweepRow> = rows.iter().filter(|r| r.cell == c).collect();
        if cell.is_empty() {
            continue;
        }
        for (k, name) in METRIC_COLUMNS.iter().enumerate() {
            let xs: Vec<f64> = cell.iter().map(|r| metric_values(&r.metrics)[k]).filter(|x| x.is_finite()).collect();
            let (mean, stderr) = mean_stderr(&xs);
            out.push(CellSummary { cell: c, settings: cell[0].settings.clone(), metric: name, n: xs.len(), mean, stderr });
        }
    }
    out
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn summary_to_csv(spec: &SweepSpec, summary: &[CellSummary]) -> String {
    let mut out = String::from("cell");
    for a in &spec.axes {
        out += ",";
        out += a.name();
    }
    out += ",metric,n,mean,stderr\n";
    for s in summary {
        let _ = write!(out, "{}", s.cell);
        for (_, v) in &s.settings {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{},{},{}", s.metric, s.n, s.mean, s.stderr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::tabular::TabularPolicy;
    use crate::levelk::TrainedModel;
    use crate::perception::STATE_COUNT_2D;

    fn crowded() -> ScenarioSource {
        ScenarioSource::Crowded(CrowdedSpec { n_manned: 8, n_uas: 1, ..Default::default() })
    }

    fn level0_only(_: &SweepCell) -> Result<PolicySet, EngineError> {
        Ok(PolicySet::default())
    }

    /// Untrained tables: every pilot flies straight.
    fn untrained(_: &SweepCell) -> Result<PolicySet, EngineError> {
        let t = || TrainedModel::Tabular(TabularPolicy::uniform(STATE_COUNT_2D, 3));
        Ok(PolicySet::new(Some(t()), Some(t())))
    }

    fn cfg() -> SimConfig {
        SimConfig { max_time: 120.0, seed: 77, ..SimConfig::for_mode(Mode::Planar) }
    }

    fn encounter() -> ScenarioSource {
        ScenarioSource::Encounter { mode: Mode::Planar, levels: [0, 0], dynamic: false, approach_deg: None, geometry: Default::default() }
    }

    #[test]
    fn single_cell_matches_direct_run() {
        let spec = SweepSpec { axes: vec![SweepAxis::Responsibility(vec![Responsibility::Shared])], seeds: 1 };
        let rows = run_sweep(&encounter(), &cfg(), &spec, &mut level0_only).unwrap();
        assert_eq!(rows.len(), 1);
        let c = SimConfig { responsibility: Responsibility::Shared, ..cfg() };
        let seed = replicate_seed(77, 0);
        let sc = encounter().build(&c, None, seed).unwrap();
        let direct = run(&sc, &SimConfig { seed, max_time: encounter_duration(&sc).min(c.max_time), ..c }, &PolicySet::default(), RunOptions::default()).unwrap();
        assert_eq!(rows[0].metrics, direct.metrics);
    }

    #[test]
    fn grid_bookkeeping() {
        let spec = SweepSpec {
            axes: vec![
                SweepAxis::DistanceHorizon(vec![5.0, 7.5, 10.0]),
                SweepAxis::TimeHorizon(vec![20.0, 40.0]),
            ],
            seeds: 2,
        };
        let cells = spec.cells(&cfg()).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].settings, vec![("distance_horizon_nm", "5".to_string()), ("time_horizon_s", "40".to_string())]);
        assert_eq!(cells[5].cfg.saa.distance_horizon, nm(10.0));
        let rows = run_sweep(&crowded(), &cfg(), &spec, &mut untrained).unwrap();
        assert_eq!(rows.len(), 12);
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 6 * METRIC_COLUMNS.len());
        assert!(summary.iter().all(|s| s.n <= 2));
    }

    #[test]
    fn safety_ratio_axis_rescales_weights() {
        let spec = SweepSpec { axes: vec![SweepAxis::SafetyRatio(vec![0.5, 1.0, 2.0, 4.0])], seeds: 20 };
        let cells = spec.cells(&cfg()).unwrap();
        assert_eq!(cells.len(), 4);
        for (c, r) in cells.iter().zip([0.5, 1.0, 2.0, 4.0]) {
            assert!((crate::reward::safety_ratio(&c.cfg.weights_2d).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn responsibility_sweep_emits_three_rows_per_seed() {
        let spec = SweepSpec { axes: vec![SweepAxis::Responsibility(Responsibility::ALL.to_vec())], seeds: 2 };
        let rows = run_sweep(&crowded(), &cfg(), &spec, &mut untrained).unwrap();
        let csv = rows_to_csv(&spec, &rows);
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("cell,responsibility,rep,seed,separation_violations"));
        // Same replicate seeds in every cell.
        assert_eq!(rows[0].seed, rows[2].seed);
    }

    #[test]
    fn axes_parse_from_toml() {
        let spec: SweepSpec = toml::from_str(
            r#"
            seeds = 3
            [[axes]]
            param = "responsibility"
            values = ["manned", "uas_only", "shared"]
            [[axes]]
            param = "saa_logic"
            values = ["saa1", "saa2"]
            "#,
        )
        .unwrap();
        assert_eq!(spec.axes[0], SweepAxis::Responsibility(Responsibility::ALL.to_vec()));
        assert_eq!(spec.axes[1].len(), 2);
    }

    #[test]
    fn stderr_hand_example() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // Sample variance 5/3, divided by n = 4.
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}

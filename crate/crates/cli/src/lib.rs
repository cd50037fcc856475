//! Subcommands of the `airsim` tool.

pub mod traj;

use std::fmt;
use std::path::{Path, PathBuf};

use airspace_sim::config::{json_hash_hex, output_header, ConfigError, Resolved, RunConfig};
use airspace_sim::engine::sweep::{replicate_seed, rows_to_csv, run_replicate_with, run_sweep, summarize, summary_to_csv, ScenarioSource, SweepRow, SweepSpec};
use airspace_sim::engine::{log_to_jsonl, EngineError, Responsibility, RunOptions};
use airspace_sim::learning::persistence::Mode;
use airspace_sim::levelk::store::{ModelKey, PolicyStore, StoreError};
use airspace_sim::levelk::PolicySet;
use airspace_sim::saa::SaaLogic;
use airspace_sim::validation::studies::{run_study, StudyError, StudyId, StudySpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_MISSING: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "airsim", version, about = "Level-k pilot models and UAS sense-and-avoid in a simulated airspace")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub saa: Option<u8>,
    #[arg(long, global = true)]
    pub responsibility: Option<ResponsibilityArg>,
    #[arg(long, global = true)]
    pub scan_radius_nm: Option<f64>,
    #[arg(long, global = true)]
    pub time_horizon_s: Option<f64>,
    #[arg(long, global = true)]
    pub miss_distance_nm: Option<f64>,
    /// Also write a JSON-lines trajectory log.
    #[arg(long, global = true)]
    pub log_trajectories: bool,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    #[value(name = "2d")]
    Planar,
    #[value(name = "3d")]
    Spatial,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Planar => Mode::Planar,
            ModeArg::Spatial => Mode::Spatial,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResponsibilityArg {
    Manned,
    Uas,
    Shared,
}

impl From<ResponsibilityArg> for Responsibility {
    fn from(r: ResponsibilityArg) -> Self {
        match r {
            ResponsibilityArg::Manned => Responsibility::MannedOnly,
            ResponsibilityArg::Uas => Responsibility::UasOnly,
            ResponsibilityArg::Shared => Responsibility::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TrajFormat {
    PaperCompare,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a level-k pilot model.
    Train {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
    },
    /// Run one scenario and write its metrics row.
    Simulate {
        /// Train models that are not on disk yet.
        #[arg(long)]
        train_missing: bool,
    },
    /// Run the configured parameter sweep.
    Sweep {
        #[arg(long)]
        train_missing: bool,
    },
    /// Run validation studies and write their reports.
    Validate {
        /// s1 to s6, or all.
        #[arg(long, default_value = "all")]
        study: String,
        #[arg(long)]
        train_missing: bool,
    },
    /// Convert a trajectory log into a plain-text comparison table.
    ExportTraj {
        log: PathBuf,
        #[arg(long, value_enum, default_value = "paper-compare")]
        format: TrajFormat,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert a comparison table back into a JSON-lines log.
    ImportTraj {
        table: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(m: impl fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: m.to_string() }
    }

    fn missing(m: impl fmt::Display) -> Self {
        Self { code: EXIT_MISSING, message: m.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::missing(e),
            _ => Failure::config(e),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Missing(_) | StoreError::Persist { .. } => Failure::missing(e),
            StoreError::Training(_) => Failure::config(e),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scenario(airspace_sim::engine::scenario::ScenarioError::Io(_)) => Failure::missing(e),
            _ => Failure::config(e),
        }
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Store(s) => s.into(),
            StudyError::Engine(s) => s.into(),
            other => Failure::config(other),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    let m = format!("{}: {e}", path.display());
    if e.kind() == std::io::ErrorKind::NotFound {
        Failure::missing(m)
    } else {
        Failure::config(m)
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

/// What a run did, for the caller to report.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Files written, in order.
    pub written: Vec<PathBuf>,
    /// Non-fatal warning that maps to a nonzero exit code.
    pub warning: Option<Failure>,
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match cli.common.threads {
        Some(0) => Err(Failure::config("--threads must be at least 1")),
        Some(n) => airspace_sim::par::with_threads(n, || dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let c = &cli.common;
    match &cli.command {
        Command::Train { level } => train(c, *level),
        Command::Simulate { train_missing } => simulate(c, *train_missing),
        Command::Sweep { train_missing } => sweep(c, *train_missing),
        Command::Validate { study, train_missing } => validate(c, study, *train_missing),
        Command::ExportTraj { log, format: TrajFormat::PaperCompare, output } => export_traj(log, output.as_deref()),
        Command::ImportTraj { table, output } => import_traj(table, output.as_deref()),
    }
}

/// Loads the configuration file, or a default single encounter when none
/// is given, and applies the command-line overrides.
pub fn load_config(c: &Common) -> Result<Resolved, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let seed = c.seed.ok_or_else(|| Failure::config("either --config or --seed is required"))?;
            let mode = c.mode.map_or(Mode::Planar, Mode::from);
            RunConfig::from_toml(&format!("seed = {seed}\n[scenario]\nkind = \"encounter\"\nmode = \"{}\"\nlevels = [1, 0]\n", mode.tag()))?
        }
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.mode {
        let m = Mode::from(m);
        match &mut cfg.scenario {
            ScenarioSource::Encounter { mode, .. } | ScenarioSource::File { mode, .. } => *mode = m,
            ScenarioSource::Crowded(spec) => spec.mode = m,
            ScenarioSource::Sample { .. } if m == Mode::Spatial => {}
            ScenarioSource::Sample { .. } => return Err(Failure::config("sample encounters are 3d only")),
        }
    }
    if let Some(l) = c.saa {
        cfg.saa.logic = Some(if l == 1 { SaaLogic::Saa1 } else { SaaLogic::Saa2 });
    }
    if let Some(r) = c.responsibility {
        cfg.sim.responsibility = Some(r.into());
    }
    if let Some(v) = c.scan_radius_nm {
        cfg.saa.distance_horizon_nm = Some(v);
    }
    if let Some(v) = c.time_horizon_s {
        cfg.saa.time_horizon_s = Some(v);
    }
    if let Some(v) = c.miss_distance_nm {
        cfg.saa.miss_distance_nm = Some(v);
    }
    Ok(cfg.resolve()?)
}

fn policy_dir(c: &Common) -> PathBuf {
    c.out.join("policies")
}

fn key(r: &Resolved, sim: &airspace_sim::engine::SimConfig, level: u8) -> ModelKey {
    ModelKey { level, mode: r.mode, sim: *sim, learning: r.learning, seed: r.seed }
}

/// Learned levels the scenario's pilots may use.
fn levels_needed(source: &ScenarioSource) -> Vec<u8> {
    let (levels, dynamic) = match source {
        ScenarioSource::Encounter { levels, dynamic, .. } | ScenarioSource::Sample { levels, dynamic, .. } => (*levels, *dynamic),
        ScenarioSource::Crowded(_) | ScenarioSource::File { .. } => return vec![1, 2],
    };
    if dynamic {
        return vec![1, 2];
    }
    let mut v: Vec<u8> = levels.iter().copied().filter(|l| *l > 0).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn train(c: &Common, level: u8) -> Result<Outcome, Failure> {
    let r = load_config(c)?;
    let dir = policy_dir(c);
    let k = key(&r, &r.sim, level);
    let prerequisites = if level > 1 {
        let lower = PolicyStore::on_disk(&dir, false).model(&key(&r, &r.sim, level - 1))?;
        PolicySet { level1: Some(lower), level2: None }
    } else {
        PolicySet::default()
    };
    let mut store = PolicyStore::on_disk(&dir, true);
    store.train(&k, &prerequisites)?;
    let rec = store.trained.last().expect("a model was just trained");

    let artifact = dir.join(&rec.file_name);
    let curve_path = c.out.join("curves").join(rec.file_name.replace(".policy", ".csv"));
    let mut csv = output_header(&r.config_hash_hex(), r.seed);
    csv.push_str("episode,mean_reward\n");
    let per = r.learning.episodes_per_iteration;
    for (i, v) in rec.curve.iter().enumerate() {
        csv.push_str(&format!("{},{v}\n", (i + 1) * per));
    }
    write(&curve_path, &csv)?;
    let warning = (!rec.converged).then(|| Failure {
        code: EXIT_NOT_CONVERGED,
        message: format!("training did not converge within {} iterations; artifact written and flagged", rec.iterations),
    });
    Ok(Outcome { written: vec![artifact, curve_path], warning })
}

fn simulate(c: &Common, train_missing: bool) -> Result<Outcome, Failure> {
    let r = load_config(c)?;
    let mut store = PolicyStore::on_disk(policy_dir(c), train_missing);
    let set = store.policy_set(&key(&r, &r.sim, 1), &levels_needed(&r.scenario))?;
    let spec = SweepSpec { axes: Vec::new(), seeds: 1 };
    let seed = replicate_seed(r.sim.seed, 0);
    let out = run_replicate_with(&r.scenario, &r.sim, None, &set, seed, RunOptions { log_trajectories: c.log_trajectories })?;
    let rows = [SweepRow { cell: 0, settings: Vec::new(), rep: 0, seed, metrics: out.metrics }];
    let header = output_header(&r.config_hash_hex(), r.seed);
    let table = rows_to_csv(&spec, &rows);
    print!("{table}");
    let metrics = c.out.join("metrics.csv");
    write(&metrics, &format!("{header}{table}"))?;
    let mut written = vec![metrics];
    if c.log_trajectories {
        let p = c.out.join("trajectories.jsonl");
        write(&p, &format!("{header}{}", log_to_jsonl(&out.log)))?;
        written.push(p);
    }
    Ok(Outcome { written, warning: None })
}

fn sweep(c: &Common, train_missing: bool) -> Result<Outcome, Failure> {
    let r = load_config(c)?;
    let spec = r.sweep.clone().unwrap_or_default();
    let levels = levels_needed(&r.scenario);
    let mut store = PolicyStore::on_disk(policy_dir(c), train_missing);
    let mut store_error = None;
    let rows = run_sweep(&r.scenario, &r.sim, &spec, &mut |cell| {
        store.policy_set(&key(&r, &cell.cfg, 1), &levels).map_err(|e| {
            let m = e.to_string();
            store_error = Some(e);
            EngineError::Config(m)
        })
    });
    if let Some(e) = store_error {
        return Err(e.into());
    }
    let rows = rows?;
    let header = output_header(&r.config_hash_hex(), r.seed);
    let long = c.out.join("sweep.csv");
    write(&long, &format!("{header}{}", rows_to_csv(&spec, &rows)))?;
    let summary = c.out.join("sweep_summary.csv");
    write(&summary, &format!("{header}{}", summary_to_csv(&spec, &summarize(&rows))))?;
    Ok(Outcome { written: vec![long, summary], warning: None })
}

fn validate(c: &Common, study: &str, train_missing: bool) -> Result<Outcome, Failure> {
    let ids: Vec<StudyId> = if study.eq_ignore_ascii_case("all") {
        StudyId::ALL.to_vec()
    } else {
        study
            .split(',')
            .map(|s| StudyId::parse(s.trim()).ok_or_else(|| Failure::config(format!("unknown study `{s}`"))))
            .collect::<Result<_, _>>()?
    };
    let mut store = PolicyStore::on_disk(policy_dir(c), train_missing);
    let dir = c.out.join("reports");
    let mut written = Vec::new();
    for id in ids {
        let mut spec = StudySpec::desk(id);
        if let Some(s) = c.seed {
            spec.seed = s;
        }
        let report = run_study(&spec, &mut store)?;
        let hash = json_hash_hex(&spec);
        let md = dir.join(format!("{}.md", id.tag()));
        let csv = dir.join(format!("{}.csv", id.tag()));
        write(&md, &format!("<!-- {} -->\n{}", output_header(&hash, spec.seed).trim_end().trim_start_matches("# "), report.to_markdown()))?;
        write(&csv, &format!("{}{}", output_header(&hash, spec.seed), report.to_csv()))?;
        println!("{} {}: {}", id.tag(), id.title(), if report.passed() { "PASS" } else { "FAIL" });
        written.extend([md, csv]);
    }
    Ok(Outcome { written, warning: None })
}

fn emit(output: Option<&Path>, text: &str) -> Result<Vec<PathBuf>, Failure> {
    match output {
        Some(p) => write(p, text).map(|_| vec![p.to_path_buf()]),
        None => {
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn export_traj(log: &Path, output: Option<&Path>) -> Result<Outcome, Failure> {
    let (header, records) = traj::read_log(&read(log)?).map_err(|e| Failure::config(format!("{}: {e}", log.display())))?;
    let header = header.unwrap_or_else(|| output_header("unknown", 0).trim_end().to_string());
    Ok(Outcome { written: emit(output, &traj::export_paper_compare(&header, &records))?, warning: None })
}

fn import_traj(table: &Path, output: Option<&Path>) -> Result<Outcome, Failure> {
    let text = read(table)?;
    let records = traj::import_paper_compare(&text).map_err(|e| Failure::config(format!("{}: {e}", table.display())))?;
    let header = text.lines().find(|l| l.starts_with("# airsim")).map_or_else(|| output_header("unknown", 0), |h| format!("{h}\n"));
    Ok(Outcome { written: emit(output, &format!("{header}{}", log_to_jsonl(&records)))?, warning: None })
}

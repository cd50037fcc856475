use std::path::Path;
use std::process::{Command, Output};

const QUICK_LEARNING: &str = "[learning]\nepisodes_per_iteration = 4\nmax_iterations = 3\nmin_iterations = 1\nwindow = 1\n";

fn airsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn encounter(levels: &str) -> String {
    format!("seed = 11\n[scenario]\nkind = \"encounter\"\nmode = \"2d\"\nlevels = {levels}\napproach_deg = 120.0\n{QUICK_LEARNING}")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn level_two_needs_level_one_first() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", &encounter("[2, 1]"));
    let o = airsim(d.path(), &["train", "--config", &cfg, "--level", "2"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn training_is_reproducible_and_writes_a_curve() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", &encounter("[1, 0]"));
    let a = airsim(d.path(), &["train", "--config", &cfg, "--out", "a"]);
    let b = airsim(d.path(), &["train", "--config", &cfg, "--out", "b", "--threads", "1"]);
    assert!([0, 3].contains(&code(&a)) && code(&a) == code(&b));
    let names: Vec<_> = std::fs::read_dir(d.path().join("a/policies")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
    let name = names[0].to_str().unwrap();
    assert!(name.starts_with("level1_2d_") && name.ends_with(".policy"));
    assert_eq!(std::fs::read(d.path().join("a/policies").join(name)).unwrap(), std::fs::read(d.path().join("b/policies").join(name)).unwrap());

    let curve = std::fs::read_to_string(d.path().join("a/curves").join(name.replace(".policy", ".csv"))).unwrap();
    assert!(curve.starts_with("# airsim "));
    let rows = data_lines(&curve);
    assert_eq!(rows[0], "episode,mean_reward");
    let episodes: Vec<u64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(!episodes.is_empty() && episodes.windows(2).all(|w| w[0] < w[1]));

    let o = airsim(d.path(), &["train", "--config", &cfg, "--out", "a", "--level", "2"]);
    assert!([0, 3].contains(&code(&o)), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(d.path().join("a/policies")).unwrap().count(), 2);
}

#[test]
fn non_convergence_exits_three_and_keeps_the_artifact() {
    let d = tempfile::tempdir().unwrap();
    let body = format!(
        "seed = 2\n[scenario]\nkind = \"encounter\"\nmode = \"2d\"\nlevels = [1, 0]\n[learning]\nepisodes_per_iteration = 3\nmax_iterations = 2\nmin_iterations = 2\nwindow = 2\ntolerance = 1e-12\n"
    );
    let cfg = write_config(d.path(), "c.toml", &body);
    let o = airsim(d.path(), &["train", "--config", &cfg]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(d.path().join("out/policies")).unwrap().count(), 1);
}

#[test]
fn unknown_config_key_names_the_key() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", &format!("{}\n[saa]\nscan_radius = 3.0\n", encounter("[0, 0]")));
    let o = airsim(d.path(), &["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scan_radius"));
}

#[test]
fn missing_files_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", "nope.toml"])), 2);
    let cfg = write_config(d.path(), "c.toml", &encounter("[1, 0]"));
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", &cfg])), 2);
    assert_eq!(code(&airsim(d.path(), &["export-traj", "nope.jsonl"])), 2);
}

#[test]
fn simulate_runs_end_to_end_and_exports_trajectories() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", &encounter("[1, 0]"));
    let o = airsim(d.path(), &["simulate", "--config", &cfg, "--train-missing", "--log-trajectories"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(d.path().join("out/metrics.csv")).unwrap();
    assert!(metrics.starts_with("# airsim ") && metrics.contains("seed=11"));
    assert_eq!(data_lines(&metrics).len(), 2);

    let again = airsim(d.path(), &["simulate", "--config", &cfg, "--threads", "1", "--out", "one"]);
    assert_eq!(code(&again), 2, "models live under the other output directory");
    std::fs::create_dir_all(d.path().join("one")).unwrap();
    let copied = d.path().join("one/policies");
    std::fs::create_dir_all(&copied).unwrap();
    for e in std::fs::read_dir(d.path().join("out/policies")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), copied.join(e.file_name())).unwrap();
    }
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", &cfg, "--threads", "1", "--out", "one"])), 0);
    assert_eq!(metrics, std::fs::read_to_string(d.path().join("one/metrics.csv")).unwrap());

    let o = airsim(d.path(), &["export-traj", "out/trajectories.jsonl", "--format", "paper-compare", "--output", "table.txt"]);
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(d.path().join("table.txt")).unwrap();
    assert_eq!(table.matches("\naircraft ").count(), 2);
    assert!(table.starts_with("# airsim "));
    assert_eq!(code(&airsim(d.path(), &["import-traj", "table.txt", "--output", "back.jsonl"])), 0);
    let back = std::fs::read_to_string(d.path().join("back.jsonl")).unwrap();
    let original = std::fs::read_to_string(d.path().join("out/trajectories.jsonl")).unwrap();
    assert_eq!(data_lines(&back).len(), data_lines(&original).len());
}

#[test]
fn seed_override_changes_the_header() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", &encounter("[0, 0]"));
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", &cfg, "--out", "a"])), 0);
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", &cfg, "--out", "b", "--seed", "12"])), 0);
    let first = |p: &str| std::fs::read_to_string(d.path().join(p)).unwrap().lines().next().unwrap().to_string();
    assert_ne!(first("a/metrics.csv"), first("b/metrics.csv"));
    assert!(first("b/metrics.csv").ends_with("seed=12"));
}

#[test]
fn one_cell_sweep_matches_simulate() {
    let d = tempfile::tempdir().unwrap();
    let sim = write_config(d.path(), "s.toml", &encounter("[0, 0]"));
    let sweep = write_config(d.path(), "w.toml", &format!("{}\n[sweep]\nseeds = 1\n", encounter("[0, 0]")));
    assert_eq!(code(&airsim(d.path(), &["simulate", "--config", &sim])), 0);
    assert_eq!(code(&airsim(d.path(), &["sweep", "--config", &sweep])), 0);
    let a = std::fs::read_to_string(d.path().join("out/metrics.csv")).unwrap();
    let b = std::fs::read_to_string(d.path().join("out/sweep.csv")).unwrap();
    assert_eq!(data_lines(&a), data_lines(&b));
}

#[test]
fn responsibility_sweep_has_three_cells_per_seed() {
    let d = tempfile::tempdir().unwrap();
    let body = format!("{}\n[sweep]\nseeds = 4\naxes = [{{ param = \"responsibility\", values = [\"manned\", \"uas\", \"shared\"] }}]\n", encounter("[0, 0]"));
    let cfg = write_config(d.path(), "c.toml", &body);
    let o = airsim(d.path(), &["sweep", "--config", &cfg, "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.path().join("out/sweep.csv")).unwrap();
    let rows = data_lines(&text);
    assert!(rows[0].starts_with("cell,responsibility,rep,seed,separation_violations"));
    assert_eq!(rows.len(), 1 + 3 * 4);
}

use std::process::{Command, Output};

fn incoupler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incoupler"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_scenarios() {
    let o = incoupler(&["list-scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let names: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    assert_eq!(names, ["pulsed", "continuous", "free", "rabi_control"]);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = incoupler(&["run", "pulsed", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn validate_names_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "dt = -1e-5\n").unwrap();
    let o = incoupler(&["validate", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("`dt`"), "{}", stderr(&o));

    std::fs::write(&path, "grid_points = 2048\nsqueezing_db = 3\n").unwrap();
    let o = incoupler(&["validate", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok"));
}

#[test]
fn unknown_scenario_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = incoupler(&["run", "sideways", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown scenario"));
}

#[test]
fn rabi_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rabi");
    let o = incoupler(&["run", "rabi_control", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert!(csv.starts_with("t,beam_atoms,probe_photons,condensate_atoms,"));
}

#[test]
fn pulsed_defaults_peak_near_54_ms() {
    let dir = tempfile::tempdir().unwrap();
    let o = incoupler(&["run", "pulsed", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: String = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let line = summary
        .lines()
        .find(|l| l.trim_start().starts_with("\"peak_probe_time\""))
        .unwrap();
    let t: f64 = line
        .split(':')
        .nth(1)
        .unwrap()
        .trim()
        .trim_end_matches(',')
        .parse()
        .unwrap();
    assert!((t / 54e-3 - 1.0).abs() <= 0.10, "peak at {t}");
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "duration = 1.0\n").unwrap();
    let out = dir.path().join("o");
    let o = incoupler(&[
        "run",
        "free",
        "--config",
        cfg.to_str().unwrap(),
        "--duration",
        "0.002",
        "--grid-points",
        "1024",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"duration\": 0.002"));
    assert!(summary.contains("\"grid_points\": 1024"));
}

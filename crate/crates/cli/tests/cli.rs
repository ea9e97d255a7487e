use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn levicav() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levicav"));
    c.env_remove("LEVICAV_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    levicav().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let line = stderr(o).lines().last().unwrap_or_default().to_string();
    serde_json::from_str(&line).unwrap_or_else(|_| panic!("stderr is not JSON: {line}"))
}

fn run_dir(o: &Output) -> PathBuf {
    assert!(o.status.success(), "{}", stderr(o));
    PathBuf::from(stdout(o).lines().last().expect("run directory").trim())
}

fn parse_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn steady_state_at_node_has_coldest_y() {
    let o = run(&["steady-state", "--phase", "node", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let t: Vec<f64> = (0..3).map(|i| v["axes"][i]["temperature_k"].as_f64().unwrap()).collect();
    assert!(t[1] < t[0] && t[1] < t[2], "{t:?}");

    let table = stdout(&run(&["steady-state", "--phase", "node"]));
    for axis in ["x ", "y ", "z "] {
        assert!(table.lines().any(|l| l.starts_with(axis)), "{table}");
    }
}

#[test]
fn bundled_config_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("paper_defaults.json");
    std::fs::write(&cfg, run(&["defaults"]).stdout).unwrap();
    let o = run(&["steady-state", cfg.to_str().unwrap(), "--phase", "node"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = run(&["calibrate-everything"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn negative_pressure_is_a_config_error() {
    let o = run(&["steady-state", "--set", "environment.pressure_mbar=-1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["key"], "environment.pressure_mbar");
    assert!(e["message"].as_str().unwrap().contains("mbar"));
}

#[test]
fn empty_config_lists_sections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, "").unwrap();
    let o = run(&["steady-state", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = error_json(&o)["message"].as_str().unwrap().to_string();
    for s in ["cavity", "tweezer", "particle", "environment", "coupling", "sweep"] {
        assert!(msg.contains(s), "{msg}");
    }
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = run(&["steady-state", "/nonexistent/levicav.json"]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(error_json(&o)["error"], "io");
}

#[test]
fn anti_damping_detuning_exits_with_instability_code() {
    let o = run(&["steady-state", "--set", "tweezer.detuning_hz=-400000"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "unstable");
}

#[test]
fn detuning_sweep_table_matches_oracle_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep-detuning", "--out", dir.path().to_str().unwrap()]);
    let rd = run_dir(&o);
    let (header, rows) = parse_csv(&rd.join("fig4_detuning.csv"));
    assert_eq!(
        header,
        ["detuning_hz", "phase_rad", "axis", "temperature_K", "damping_rad_s", "cooling_rate_rad_s", "stable", "predicate_stable"]
    );
    let ty: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[2] == "y")
        .map(|r| (r[0].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    assert_eq!(ty.len(), 8);
    let (f_min, _) = ty.iter().copied().fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });

    // same minimum as a direct steady-state evaluation per grid point
    let mut best = (f64::NAN, f64::INFINITY);
    for (f, _) in &ty {
        let o = run(&["steady-state", "--json", "--set", &format!("tweezer.detuning_hz={f}")]);
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let t = v["axes"][1]["temperature_k"].as_f64().unwrap();
        if t < best.1 {
            best = (*f, t);
        }
    }
    assert_eq!(f_min, best.0);
    assert!(rd.join("manifest.json").exists());
}

#[test]
fn empty_grid_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep-pressure", "--set", "sweep.pressures_mbar=[]", "--out", dir.path().to_str().unwrap()]);
    let rd = run_dir(&o);
    let text = std::fs::read_to_string(rd.join("fig2_temperatures.csv")).unwrap();
    assert_eq!(text, "pressure_mbar,phase_rad,axis,temperature_K\n");
}

fn assert_same_files(a: &Path, b: &Path, files: &[&str]) {
    for f in files {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs between {} and {}", a.display(), b.display());
    }
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let first = run_dir(&run(&["sweep-pressure", "--out", out]));
    let again = run_dir(&run(&["rerun", first.join("manifest.json").to_str().unwrap(), "--out", out]));
    assert_ne!(first, again);
    assert_same_files(&first, &again, &["fig2_temperatures.csv", "fig2_damping.csv", "fig2_fits.json", "manifest.json"]);

    let args = [
        "relaxation",
        "--phase",
        "slope",
        "--set",
        "sweep.relaxation_ensemble=4",
        "--set",
        "sweep.relaxation_duration_s=0.005",
        "--set",
        "sweep.relaxation_pre_s=0.001",
        "--set",
        "sweep.dt_s=2e-6",
        "--out",
        out,
    ];
    let first = run_dir(&run(&args));
    let again = run_dir(&run(&["rerun", first.join("manifest.json").to_str().unwrap(), "--out", out, "--jobs", "1"]));
    assert_same_files(&first, &again, &["fig3_relaxation.csv", "fig3_fits.json"]);
}

#[test]
fn seed_environment_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicav()
        .env("LEVICAV_SEED", "1234")
        .args(["sweep-power", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    let rd = run_dir(&o);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rd.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 1234);
    assert_eq!(m["config"]["sweep"]["seed"], 1234);
    assert_eq!(m["command"], "sweep-power");

    let bad = levicav().env("LEVICAV_SEED", "abc").args(["steady-state"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_then_psd() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sim = run_dir(&run(&["simulate", "--set", "sweep.duration_s=0.02", "--csv", "--out", out]));
    for trace in ["trace.bin", "trace.csv"] {
        let o = run(&["psd", sim.join(trace).to_str().unwrap(), "--segment", "2048", "--out", out]);
        let rd = run_dir(&o);
        let (header, rows) = parse_csv(&rd.join("psd_q_y.csv"));
        assert_eq!(header, ["frequency_hz", "psd"]);
        assert_eq!(rows.len(), 1025);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(rd.join("psd_summary.json")).unwrap()).unwrap();
        assert!(summary["variance"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn malformed_trace_is_an_analysis_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("junk.bin");
    std::fs::write(&f, b"not a trace").unwrap();
    let o = run(&["psd", f.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&o)["error"], "format");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["sweep-power", "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(error_json(&o)["path"].as_str().unwrap().contains("file"));
}

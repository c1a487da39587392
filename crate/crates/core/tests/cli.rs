use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

use ion_gauge::cli::files::sha256_hex;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ion-gauge"))
        .args(args)
        .env_remove("ION_GAUGE_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    let o = run(args);
    o.status.code().expect("exit code")
}

fn hash(p: &Path) -> String {
    sha256_hex(&fs::read(p).unwrap())
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// compile → schedule for the N = 5 ring at β = 40.
fn ring_schedule(dir: &TempDir) -> String {
    let terms = p(dir, "terms.json");
    let sched = p(dir, "schedule.json");
    assert_eq!(code(&["compile", "--geometry", "ring", "--n", "5", "--loop-flux", "2.356", "--out", &terms]), 0);
    assert_eq!(code(&["schedule", "--terms", &terms, "--beta", "40", "--grid-divisor", "2", "--out", &sched]), 0);
    sched
}

#[test]
fn compile_writes_hz_and_one_based_terms() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "terms.json");
    assert_eq!(code(&["compile", "--geometry", "ring", "--n", "5", "--loop-flux", "2.356", "--out", &out]), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["units"], "Hz");
    assert_eq!(v["n_ions"], 5);
    let omegas: Vec<f64> = v["terms"].as_array().unwrap().iter().map(|t| t["omega"].as_f64().unwrap()).collect();
    assert_eq!(omegas, vec![100.0, 100.0]);
    assert!(dir.path().join("terms.manifest.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&["compile", "--geometry", "torus", "--n", "5"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--manifest", "m.json", "verify-magnus"]), 2);
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&["schedule", "--terms", &p(&dir, "missing.json")]), 2);
}

#[test]
fn schedule_validates_and_magnus_check_passes() {
    let dir = TempDir::new().unwrap();
    let sched = ring_schedule(&dir);
    let o = run(&["validate", "--schedule", &sched, "--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify-magnus", "--out", &p(&dir, "magnus.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn csv_carries_input_hash_and_manifest_replays() {
    let dir = TempDir::new().unwrap();
    let sched = ring_schedule(&dir);
    let traj = p(&dir, "traj.csv");
    let args = ["simulate", "--schedule", &sched, "--effective", "--t-end", "0.01", "--samples", "20", "--out", &traj];
    assert_eq!(code(&args), 0);
    let text = fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("# input_sha256="));
    let first = hash(Path::new(&traj));

    let manifest = p(&dir, "traj.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["outputs"][0]["sha256"], first);

    fs::remove_file(&traj).unwrap();
    assert_eq!(code(&["--manifest", &manifest]), 0);
    assert_eq!(hash(Path::new(&traj)), first);

    // editing an input makes the manifest stale
    let mut s = fs::read_to_string(&sched).unwrap();
    s.push('\n');
    fs::write(&sched, s).unwrap();
    assert_eq!(code(&["--manifest", &manifest]), 2);
}

#[test]
fn output_root_redirects_relative_paths() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ion-gauge"))
        .args(["compile", "--geometry", "triangular", "--n", "6", "--j2-over-j1", "0.5", "--out", "tri.json"])
        .env("ION_GAUGE_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("tri.json").exists());
}

#[test]
fn spacer_ladder_experiment() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "ladder");
    assert_eq!(code(&["experiment", "spacer-ladder", "--out-dir", &out]), 0);
    assert!(Path::new(&out).join("manifest.json").exists());
}

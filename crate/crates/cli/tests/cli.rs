use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pwlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pwlab"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name)
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "stderr should be one line: {text}");
    serde_json::from_str(lines[0]).unwrap()
}

const SMALL_MEASUREMENT: &str = r#"
scenario = "measurement"
seed = 5

[measurement]
eigenvalues = [-1.0, 1.0]
weights = [0.4, 0.6]
coupling = 8.0
duration = 2.0
dt = 0.02
samples = 2000

[measurement.pointer]
sigma = 1.0

[measurement.grid]
points = 256
length = 64.0
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_preset_validates_without_writing() {
    let cwd = tempfile::tempdir().unwrap();
    let mut count = 0;
    for entry in fs::read_dir(preset("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map_or(true, |e| e != "toml") {
            continue;
        }
        let out = pwlab().arg("validate").arg("--config").arg(&path).current_dir(cwd.path()).output().unwrap();
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
        count += 1;
    }
    assert_eq!(count, 15);
    assert_eq!(fs::read_dir(cwd.path()).unwrap().count(), 0);
}

#[test]
fn circle_preset_quarter_arc() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = pwlab()
        .args(["run", "torus", "--config"])
        .arg(preset("torus_circle.toml"))
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&out_dir.path().join("summary.json"));
    let ratio = s["statistics"]["boxes"][0]["ratio"].as_f64().unwrap();
    assert!((ratio - 0.25).abs() < 0.005, "ratio {ratio}");
    assert_eq!(s["passed"], true);
    let m = json_file(&out_dir.path().join("manifest.json"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(out_dir.path().join("occupancy_box0.csv").exists());
    assert!(!out_dir.path().join(".pwlab.lock").exists());
}

#[test]
fn stern_gerlach_preset_born_frequencies() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = pwlab()
        .args(["run", "stern_gerlach", "--config"])
        .arg(preset("stern_gerlach_born_03.toml"))
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&out_dir.path().join("summary.json"));
    for c in s["checks"].as_array().unwrap() {
        assert_eq!(c["passed"], true, "{c}");
        if c["name"].as_str().unwrap().ends_with("frequency_up") {
            assert!((c["value"].as_f64().unwrap() - 0.3).abs() < 0.014);
        }
    }
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"warp\"\n");
    let out = pwlab().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["error"], "config");
    assert_eq!(e["exit_code"], 2);
}

#[test]
fn malformed_toml_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"torus\n[torus\n");
    let out = pwlab().args(["run", "torus", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    stderr_json(&out);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_MEASUREMENT.replace("samples = 2000", "samples = 2000\nsamples_x = 1"));
    let out = pwlab().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("samples_x"));
}

#[test]
fn unknown_command_line_flag() {
    let out = pwlab().args(["run", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    stderr_json(&out);
}

#[test]
fn scenario_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MEASUREMENT);
    let out = pwlab().args(["run", "torus", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    stderr_json(&out);
}

#[test]
fn unwritable_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MEASUREMENT);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = pwlab()
        .args(["run", "measurement", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn locked_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MEASUREMENT);
    let o = dir.path().join("o");
    fs::create_dir(&o).unwrap();
    fs::write(o.join(".pwlab.lock"), "").unwrap();
    let out = pwlab().args(["run", "measurement", "--config"]).arg(&cfg).arg("--out").arg(&o).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("locked"));
    assert!(!o.join("manifest.json").exists());
}

#[test]
fn bad_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MEASUREMENT);
    let out = pwlab()
        .env("PWLAB_THREADS", "0")
        .args(["run", "measurement", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    stderr_json(&out);
}

#[test]
fn unseparated_branches_are_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_MEASUREMENT.replace("duration = 2.0", "duration = 0.2");
    let cfg = write_config(dir.path(), &text);
    let o = dir.path().join("o");
    let out = pwlab().args(["run", "measurement", "--config"]).arg(&cfg).arg("--out").arg(&o).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json_file(&o.join("summary.json"));
    assert_eq!(s["status"], "invalid");
    assert_eq!(s["passed"], false);
    let m = json_file(&o.join("manifest.json"));
    assert_eq!(m["exit_code"], 3);
    assert_eq!(m["status"], "invalid");
}

#[test]
fn same_seed_gives_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MEASUREMENT);
    let run = |name: &str, threads: &str| {
        let o = dir.path().join(name);
        let out = pwlab()
            .env("PWLAB_THREADS", threads)
            .args(["run", "measurement", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&o)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        o
    };
    let a = run("a", "1");
    let b = run("b", "3");
    for f in ["outcomes.csv", "frequencies.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    let out = pwlab()
        .args(["run", "measurement", "--config"])
        .arg(&cfg)
        .args(["--seed", "6", "--out"])
        .arg(&c)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read(a.join("outcomes.csv")).unwrap(), fs::read(c.join("outcomes.csv")).unwrap());
    assert_eq!(json_file(&c.join("manifest.json"))["seed"], 6);
}

#[test]
fn torus_oracle() {
    let out = pwlab()
        .args(["oracle", "torus", "--lengths", "1.0", "--n", "1", "--x0", "0.0", "--t", "0.25"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let x = v["position"][0].as_f64().unwrap();
    let expected = (2.0 * std::f64::consts::PI * 0.25).rem_euclid(1.0);
    assert!((x - expected).abs() < 1e-12, "{x}");
    assert!((v["velocities"][0].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    let bad = pwlab().args(["oracle", "torus", "--lengths", "1,2", "--n", "1", "--x0", "0", "--t", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    stderr_json(&bad);
}

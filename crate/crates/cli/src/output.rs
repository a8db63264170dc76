use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pwlab::scenarios::{empty_summary, ScenarioReport};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

/// Error reported as one JSON line on stderr.
#[derive(Debug, Clone)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Self {
            kind: "config",
            message,
            code: 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("cannot write {}: {e}", path.display()))
    }

    pub fn to_json(&self) -> Value {
        json!({"error": self.kind, "exit_code": self.code, "message": self.message})
    }

    pub fn emit(&self) {
        eprintln!("{}", self.to_json());
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Output directory held under a lockfile for the duration of a run.
pub struct OutputDir {
    root: PathBuf,
    lock: Option<PathBuf>,
    files: Vec<String>,
    started: f64,
    scenario: String,
    seed: u64,
    config_hash: String,
}

const LOCK: &str = ".pwlab.lock";

impl OutputDir {
    pub fn open(root: &Path, cfg: &RunConfig, seed: u64) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| Failure::io(root, e))?;
        let lock = root.join(LOCK);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Failure::config(format!("output directory {} is locked by another run", root.display()))
                } else {
                    Failure::io(&lock, e)
                }
            })?;
        Ok(Self {
            root: root.to_path_buf(),
            lock: Some(lock),
            files: Vec::new(),
            started: now(),
            scenario: cfg.scenario.clone(),
            seed,
            config_hash: cfg.sha256.clone(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_report(&mut self, report: &ScenarioReport, heatmaps: bool) -> Result<(), Failure> {
        for (stem, table) in &report.tables {
            self.write(&format!("{stem}.csv"), table.to_csv().as_bytes())?;
        }
        if heatmaps {
            for (stem, h) in &report.heatmaps {
                self.write(&format!("{stem}.pgm"), &h.to_pgm())?;
            }
        }
        let mut summary = report.summary_json();
        summary["seed"] = json!(self.seed);
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        self.write("summary.json", text.as_bytes())?;
        self.write("summary.txt", report.human_table().as_bytes())?;
        Ok(())
    }

    pub fn write_failure_summary(&mut self, scenario: &str, failure: &Failure) -> Result<(), Failure> {
        let mut summary = empty_summary(scenario);
        summary["status"] = json!(if failure.code == 3 { "invalid" } else { "no_data" });
        summary["error"] = failure.to_json();
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        self.write("summary.json", text.as_bytes())
    }

    /// Writes `manifest.json` and releases the lock.
    pub fn finish(&mut self, report: Option<&ScenarioReport>, failure: Option<&Failure>, code: u8) -> Result<(), Failure> {
        let mut tolerances = Map::new();
        tolerances.insert("fields.node_floor_relative".into(), json!(pwlab::fields::NODE_FLOOR_RELATIVE));
        tolerances.insert("propagator.stability_limit".into(), json!(pwlab::propagator::DEFAULT_STABILITY_LIMIT));
        tolerances.insert("guidance.max_refinements".into(), json!(pwlab::guidance::MAX_REFINEMENTS));
        tolerances.insert("ensemble.min_acceptance".into(), json!(pwlab::ensemble::MIN_ACCEPTANCE));
        if let Some(r) = report {
            for c in &r.checks {
                tolerances.insert(format!("{}.{}", r.scenario, c.name), json!(c.tolerance));
            }
        }
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        let manifest = json!({
            "tool": "pwlab",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "scenario": self.scenario,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "started_unix": self.started,
            "finished_unix": now(),
            "exit_code": code,
            "status": report.map(|r| json!(r.status)).unwrap_or(json!(if code == 3 { "invalid" } else { "no_data" })),
            "error": failure.map(Failure::to_json),
            "tolerances": tolerances,
            "files": files,
        });
        let path = self.root.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| Failure::io(&path, e))?;
        self.release();
        Ok(())
    }

    fn release(&mut self) {
        if let Some(l) = self.lock.take() {
            let _ = fs::remove_file(l);
        }
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        self.release();
    }
}

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pwlab::ergodic::TorusFlow;
use pwlab::fields::MAX_DIMS;
use pwlab::scenarios::{
    run_kicked_relaxation, run_measurement, run_stern_gerlach, run_torus, run_two_slit, ScenarioReport, Status,
};
use pwlab::Error;

use config::{RunConfig, ScenarioParams};
use output::{Failure, OutputDir};

#[derive(Parser)]
#[command(name = "pwlab", version, about = "Pilot-wave dynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        scenario: String,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "pwlab-out")]
        out: PathBuf,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Closed-form evaluations for cross-checks.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Position of the eigenstate flow on a torus at time `t`.
    Torus {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lengths: Vec<f64>,
        #[arg(long = "n", value_delimiter = ',', allow_hyphen_values = true)]
        quantum_numbers: Vec<i64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    config::parse(&text).map_err(Failure::from)
}

fn dispatch(cfg: &RunConfig, seed: u64) -> pwlab::Result<ScenarioReport> {
    match &cfg.params {
        ScenarioParams::Torus(c) => run_torus(c, seed),
        ScenarioParams::Measurement(c) => run_measurement(c, seed).map(|r| r.0),
        ScenarioParams::SternGerlach(c) => run_stern_gerlach(c, seed).map(|r| r.0),
        ScenarioParams::TwoSlit(c) => run_two_slit(c, seed),
        ScenarioParams::Kicked(c) => run_kicked_relaxation(c, seed),
    }
}

fn set_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("PWLAB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::config(format!("PWLAB_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn run(scenario: &str, config: &Path, seed: Option<u64>, out: &Path) -> Result<u8, Failure> {
    set_threads()?;
    let cfg = load(config)?;
    if cfg.scenario != scenario {
        return Err(Failure::config(format!(
            "config describes scenario {:?}, not {scenario:?}",
            cfg.scenario
        )));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let mut dir = OutputDir::open(out, &cfg, seed)?;
    let result = dispatch(&cfg, seed);
    match result {
        Ok(report) => {
            dir.write_report(&report, cfg.output.heatmaps)?;
            print!("{}", report.human_table());
            let code = if report.status == Status::Invalid { 3 } else { 0 };
            dir.finish(Some(&report), None, code)?;
            Ok(code)
        }
        Err(e) => {
            let failure = Failure::from(e);
            dir.write_failure_summary(&cfg.scenario, &failure)?;
            dir.finish(None, Some(&failure), failure.code)?;
            Err(failure)
        }
    }
}

fn oracle_torus(lengths: &[f64], ns: &[i64], x0: &[f64], t: f64) -> Result<u8, Failure> {
    if lengths.is_empty() || lengths.len() > MAX_DIMS || ns.len() != lengths.len() || x0.len() != lengths.len() {
        return Err(Failure::config("lengths, n and x0 need the same 1 to 3 entries".into()));
    }
    if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) || !t.is_finite() {
        return Err(Failure::config("lengths must be positive and t finite".into()));
    }
    let flow = TorusFlow::unit(ns, lengths);
    let mut start = [0.0; MAX_DIMS];
    start[..x0.len()].copy_from_slice(x0);
    let x = flow.position(&start, t);
    let v = serde_json::json!({
        "t": t,
        "position": &x[..lengths.len()],
        "velocities": flow.velocities(),
    });
    println!("{v}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            Failure::config(first.to_string()).emit();
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            out,
        } => run(&scenario, &config, seed, &out),
        Command::Validate { config } => load(&config).map(|c| {
            println!("ok {}", c.scenario);
            0
        }),
        Command::Oracle {
            which:
                Oracle::Torus {
                    lengths,
                    quantum_numbers,
                    x0,
                    t,
                },
        } => oracle_torus(&lengths, &quantum_numbers, &x0, t),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            f.emit();
            ExitCode::from(f.code)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (kind, code) = match &e {
            Error::Config(_) | Error::Parse(_) => ("config", 2),
            _ => ("numerical", 3),
        };
        Failure {
            kind,
            message: e.to_string(),
            code,
        }
    }
}

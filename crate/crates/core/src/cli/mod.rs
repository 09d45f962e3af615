//! Configuration-driven experiment runner behind the `ctrw` binary.
//!
//! Each subcommand reads one TOML file (schema in `docs/config.md`), runs one task, and writes
//! its artifacts plus a `manifest.json` listing every file with its sha256 digest. Path `i`
//! always draws from ChaCha8 stream `i` of the run seed, so output does not depend on the
//! number of worker threads.

mod config;
mod tasks;

pub use config::{ExperimentConfig, OutputConfig, RunConfig, Task};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::digest_json;
use crate::kernels::Violation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ctrw", version, about = "Simulate space-time dependent random walks and solve their fractional Kolmogorov equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides output.directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Pre-limit walk X^n, Y^n at the run times.
    SimulateCtrw,
    /// Limit processes X, Y via the space-time driver.
    SimulateLimit,
    /// Forward density on the grid.
    SolveForward,
    /// Backward expectation on the grid, target time grid.T.
    SolveBackward,
    /// Pre-limit kernel moments against their limits.
    VerifyCoefficients,
    /// Marginal-law identity by paired Monte Carlo.
    LawCheck,
    /// KS distance of pre-limit to limit marginals over run.scales.
    Converge,
    /// Forward density against Monte Carlo at grid.T.
    Compare,
    /// Check the configuration without running anything.
    Validate,
}

impl Command {
    fn task(self) -> Option<Task> {
        Some(match self {
            Command::SimulateCtrw => Task::SimulateCtrw,
            Command::SimulateLimit => Task::SimulateLimit,
            Command::SolveForward => Task::SolveForward,
            Command::SolveBackward => Task::SolveBackward,
            Command::VerifyCoefficients => Task::VerifyCoefficients,
            Command::LawCheck => Task::LawCheck,
            Command::Converge => Task::Converge,
            Command::Compare => Task::Compare,
            Command::Validate => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub seed: u64,
    pub task: Task,
    pub artifacts: Vec<ArtifactEntry>,
    pub metrics: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub wall_seconds: f64,
    pub versions: BTreeMap<String, String>,
    /// How per-path random streams derive from the seed.
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

pub fn validate(config: &ExperimentConfig) -> ValidationReport {
    let violations = config.validate();
    ValidationReport { valid: violations.is_empty(), violations }
}

/// Runs `task` and writes its artifacts and manifest into `config.output.directory`.
pub fn run(config: &ExperimentConfig, task: Task) -> Result<Manifest> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(Error::Config(join(&violations)));
    }
    let mut effective = config.clone();
    effective.task = Some(task);
    let start = Instant::now();
    let outcome = tasks::dispatch(&effective, task)?;
    let dir = &effective.output.directory;
    std::fs::create_dir_all(dir)?;
    let mut artifacts = Vec::with_capacity(outcome.artifacts.len());
    for (name, bytes) in &outcome.artifacts {
        std::fs::write(dir.join(name), bytes)?;
        artifacts.push(ArtifactEntry { path: name.clone(), sha256: crate::harness::hex(&Sha256::digest(bytes)) });
    }
    let manifest = Manifest {
        config_digest: digest_json(&effective),
        seed: effective.run.seed,
        task,
        artifacts,
        metrics: outcome.metrics,
        verdicts: outcome.verdicts,
        wall_seconds: start.elapsed().as_secs_f64(),
        versions: BTreeMap::from([("ctrw-core".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
        rng: "ChaCha8Rng::seed_from_u64(seed) with stream = path index".into(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(dir.join("manifest.json"), bytes)?;
    Ok(manifest)
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "<[Violation]>::is_empty")]
    violations: &'a [Violation],
}

fn report_error(kind: &str, message: String, violations: &[Violation]) {
    let body = serde_json::json!({ "error": ErrorBody { kind, message, violations } });
    eprintln!("{body}");
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() || matches!(e, Error::Io(_)) {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

fn load(path: Option<&Path>) -> std::result::Result<ExperimentConfig, Violation> {
    let path = path.ok_or_else(|| Violation::new("--config", "a configuration file is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Violation::new("--config", format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    let mut config = match load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(v) => {
            if matches!(cli.command, Command::Validate) {
                let report = ValidationReport { valid: false, violations: vec![v] };
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                report_error("validation", v.to_string(), std::slice::from_ref(&v));
            }
            return EXIT_INVALID;
        }
    };
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output.directory = out;
    }
    let Some(task) = cli.command.task() else {
        let report = validate(&config);
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        return if report.valid { EXIT_OK } else { EXIT_INVALID };
    };
    let violations = config.validate();
    if !violations.is_empty() {
        report_error("validation", join(&violations), &violations);
        return EXIT_INVALID;
    }
    match run(&config, task) {
        Ok(manifest) => {
            if !cli.quiet {
                println!("{}", serde_json::to_string_pretty(&manifest).expect("serializable"));
            }
            EXIT_OK
        }
        Err(e) => {
            let code = exit_code(&e);
            report_error(if code == EXIT_NUMERICAL { "numerical" } else { "validation" }, e.to_string(), &[]);
            code
        }
    }
}

pub fn main_entry() -> i32 {
    main_with(Cli::parse())
}

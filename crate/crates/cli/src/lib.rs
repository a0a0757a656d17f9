//! Scenario driver: parses configs, runs the solver and estimate suites, writes artifacts.

use aronsson::estimates::{CheckReport, Outcome};
use aronsson::grid::write_scalar_csv;
use aronsson::scenario::{self, Scenario, Suite};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] aronsson::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Core(aronsson::Error::Config(_)) => "config",
            CliError::Core(_) => "pipeline",
            CliError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;

pub fn exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::Pass | Outcome::Diagnostic => EXIT_PASS,
        Outcome::HypothesisNotMet => EXIT_HYPOTHESIS,
        Outcome::Fail => EXIT_FAIL,
    }
}

/// Combines per-scenario codes: any failure wins, then unmet hypotheses.
pub fn combine_codes(codes: &[i32]) -> i32 {
    if codes.contains(&EXIT_FAIL) {
        EXIT_FAIL
    } else if codes.contains(&EXIT_HYPOTHESIS) {
        EXIT_HYPOTHESIS
    } else {
        EXIT_PASS
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = io(path, fs::read_to_string(path))?;
    Ok(Scenario::from_json(&text)?)
}

/// SHA-256 of the canonical JSON form of the parsed scenario.
pub fn scenario_hash(s: &Scenario) -> Result<String> {
    let canonical = serde_json::to_vec(s)?;
    Ok(Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Debug, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: Option<bool>,
    pub outcome: Outcome,
}

#[derive(Debug, Serialize)]
pub struct SolveEntry {
    pub eps: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub residual_sup: f64,
    pub log_energy: f64,
    pub file: String,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub solves: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub scenario_hash: String,
    pub outcome: Outcome,
    pub exit_code: i32,
    pub solves: Vec<SolveEntry>,
    pub checks: Vec<CheckEntry>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub config: String,
    pub kind: &'static str,
    pub message: String,
}

/// File-name-safe form of a check or ε label.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' | '.' | '=' | '_' => c,
            _ => '_',
        })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = io(path, File::create(path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn check_entry(c: &CheckReport) -> CheckEntry {
    CheckEntry {
        name: c.name.clone(),
        pass: c.pass,
        outcome: c.outcome,
    }
}

/// Runs one scenario and writes its artifacts into `out`.
pub fn run_scenario(s: &Scenario, suites: Option<&[Suite]>, out: &Path) -> Result<Summary> {
    let start = Instant::now();
    let hash = scenario_hash(s)?;
    let result = match suites {
        Some(list) => scenario::run_suites(s, list)?,
        None => scenario::run(s)?,
    };
    io(out, fs::create_dir_all(out.join("checks")))?;

    let mut solves = Vec::new();
    let mut times = Vec::new();
    for sol in &result.solutions {
        let file = format!("u_eps={:e}.csv", sol.eps);
        let path = out.join(&file);
        let f = io(&path, File::create(&path))?;
        write_scalar_csv(&sol.u, BufWriter::new(f))?;
        solves.push(SolveEntry {
            eps: sol.eps,
            iterations: sol.iterations,
            grad_norm: sol.grad_norm,
            residual_sup: sol.residual_sup,
            log_energy: sol.energy.ln(),
            file,
        });
        times.push(sol.wall_time);
    }
    for c in &result.checks {
        write_json(
            &out.join("checks").join(format!("{}.json", slug(&c.name))),
            c,
        )?;
    }
    for (k, trace) in result.blowups.iter().enumerate() {
        let path = out.join(format!("blowup_{k}.csv"));
        let f = io(&path, File::create(&path))?;
        trace.write_csv(BufWriter::new(f))?;
    }

    let outcome = result.overall();
    let summary = Summary {
        scenario: s.name.clone(),
        scenario_hash: hash,
        outcome,
        exit_code: exit_code(outcome),
        solves,
        checks: result.checks.iter().map(check_entry).collect(),
        warnings: result.warnings,
        timings: Timings {
            solves: times,
            total: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Writes `error.json` into `out` when possible; the report is returned either way.
pub fn report_error(config: &Path, err: &CliError, out: Option<&Path>) -> ErrorReport {
    let report = ErrorReport {
        config: config.display().to_string(),
        kind: err.kind(),
        message: err.to_string(),
    };
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            // the error is also printed, so a failed write here loses nothing
            let _ = write_json(&dir.join("error.json"), &report);
        }
    }
    report
}

/// Output directory for one config: the flag, else the scenario's own setting, else `out/`.
/// Batches get one subdirectory per scenario.
pub fn output_dir(flag: Option<&Path>, s: Option<&Scenario>, batch: bool) -> PathBuf {
    let base = flag
        .map(Path::to_path_buf)
        .or_else(|| s.and_then(|s| s.output_dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"));
    match (batch, s) {
        (true, Some(s)) => base.join(slug(&s.name)),
        _ => base,
    }
}

use aronsson::scenario::Suite;
use aronsson_cli::{
    combine_codes, load, output_dir, report_error, run_scenario, EXIT_FAIL, EXIT_PASS,
};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Worker count for scenario batches; defaults to rayon's choice.
const THREADS_VAR: &str = "ARONSSON_THREADS";

#[derive(Parser)]
#[command(
    name = "aronsson",
    version,
    about = "Run Aronsson-equation scenarios and estimate suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the ε ladder of each config and run its estimate suites.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory (one subdirectory per scenario when several configs are given).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated suite names overriding the config's selection.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
    /// Parse and validate configs without solving.
    Check {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn run_one(path: &Path, out: Option<&Path>, suites: Option<&[Suite]>, batch: bool) -> i32 {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(e) => {
            let dir = out.map(|o| output_dir(Some(o), None, false));
            let report = report_error(path, &e, dir.as_deref());
            eprintln!(
                "{}",
                serde_json::to_string(&report).unwrap_or_else(|_| e.to_string())
            );
            return EXIT_FAIL;
        }
    };
    let dir = output_dir(out, Some(&scenario), batch);
    match run_scenario(&scenario, suites, &dir) {
        Ok(summary) => {
            for c in &summary.checks {
                let verdict = match c.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "-",
                };
                println!(
                    "{}: {} {verdict} ({:?})",
                    summary.scenario, c.name, c.outcome
                );
            }
            println!(
                "{}: {:?} in {:.2}s -> {}",
                summary.scenario,
                summary.outcome,
                summary.timings.total,
                dir.display()
            );
            summary.exit_code
        }
        Err(e) => {
            let report = report_error(path, &e, Some(&dir));
            eprintln!(
                "{}",
                serde_json::to_string(&report).unwrap_or_else(|_| e.to_string())
            );
            EXIT_FAIL
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check { configs } => {
            let codes: Vec<i32> = configs
                .iter()
                .map(|p| match load(p) {
                    Ok(s) => {
                        println!("{}: ok ({})", p.display(), s.name);
                        EXIT_PASS
                    }
                    Err(e) => {
                        let report = report_error(p, &e, None);
                        eprintln!(
                            "{}",
                            serde_json::to_string(&report).unwrap_or_else(|_| e.to_string())
                        );
                        EXIT_FAIL
                    }
                })
                .collect();
            combine_codes(&codes)
        }
        Command::Run {
            configs,
            out,
            suite,
        } => {
            let suites = match suite
                .iter()
                .map(|n| Suite::from_name(n))
                .collect::<Result<Vec<_>, _>>()
            {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_FAIL as u8);
                }
            };
            let suites = (!suites.is_empty()).then_some(suites.as_slice());
            if let Some(n) = std::env::var(THREADS_VAR)
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
            {
                // only fails if a global pool already exists, which cannot happen here
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            let batch = configs.len() > 1;
            let codes: Vec<i32> = configs
                .par_iter()
                .map(|p| run_one(p, out.as_deref(), suites, batch))
                .collect();
            combine_codes(&codes)
        }
    };
    ExitCode::from(code as u8)
}

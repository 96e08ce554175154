use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use relmech::scenario::{load_scenario, run_scenario, RunOptions};

/// Frame-relative analysis of second-order dynamic equations, driven by
/// scenario files.
#[derive(Parser)]
#[command(name = "relmech", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario's tasks and write JSON/CSV reports.
    Run {
        /// Scenario file.
        scenario: PathBuf,
        /// Output directory for reports.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Quasi-random sampling seed, recorded in every report.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplier applied to every task tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Parse and validate a scenario without running it.
    Check {
        /// Scenario file.
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            tol_scale,
        } => {
            let parsed = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            let opts = RunOptions {
                out_dir: out,
                seed,
                tol_scale,
            };
            match run_scenario(&parsed, &opts) {
                Ok(summary) => {
                    for outcome in &summary.outcomes {
                        println!(
                            "task {:02} {:<14} {}",
                            outcome.index,
                            outcome.kind,
                            if outcome.passed { "pass" } else { "FAIL" }
                        );
                    }
                    if summary.all_passed {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("one or more task assertions failed");
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Check { scenario } => match load_scenario(&scenario) {
            Ok(parsed) => {
                println!(
                    "ok: m = {}, {} equations, {} frames, {} charts, {} tasks",
                    parsed.m,
                    parsed.equations.len(),
                    parsed.frames.len(),
                    parsed.charts.len(),
                    parsed.tasks.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

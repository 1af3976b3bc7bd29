// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use epiq_cli::{run_file, CliError, Command, Overrides, DEFAULT_OUT_DIR, OUT_DIR_ENV};

/// Run an epiq scenario file.
#[derive(Debug, Parser)]
#[command(name = "epiq", version)]
struct Args {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Command to run; defaults to the scenario's `run.command`.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Monte Carlo sample count.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the CSV and JSON outputs.
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out_dir: PathBuf,
    /// Numeric tolerance for the run's checks.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Override whether which-path knowledge stays reachable (level-2 layers).
    #[arg(long)]
    reachable: Option<bool>,
    /// Solver starts for the uniqueness command.
    #[arg(long)]
    starts: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        command: args.command,
        n: args.n,
        seed: args.seed,
        tolerance: args.tolerance,
        reachable: args.reachable,
        starts: args.starts,
    };
    let result = run_file(&args.scenario, &overrides).and_then(|r| {
        let paths = r.write(&args.out_dir)?;
        Ok((r, paths))
    });
    match result {
        Ok((r, (csv, json))) => {
            print!("{}", r.render_text());
            println!("wrote {} and {}", csv.display(), json.display());
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("epiq: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}

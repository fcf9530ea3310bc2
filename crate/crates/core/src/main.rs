use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use claw::harness::config::read_config;
use claw::harness::experiment::run_experiment;
use claw::harness::selftest::run_selftest;
use claw::harness::table::{emit_csv, version_string};

#[derive(Parser)]
#[command(name = "claw", about = "Transport-collapse experiments for scalar conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSV.
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. `--set h=0.05` or `--set flux.name=cubic`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the invariant suites.
    Selftest,
    /// Print the version.
    Version,
}

fn run(config: PathBuf, overrides: Vec<String>) -> anyhow::Result<()> {
    let cfg = read_config(&config, &overrides)?;
    let table = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            emit_csv(&table, BufWriter::new(file))?;
        }
        None => emit_csv(&table, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run { config, overrides } => match run(config, overrides) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::Selftest => {
            let checks = run_selftest();
            let mut out = io::stdout().lock();
            for c in &checks {
                let status = if c.passed { "ok  " } else { "FAIL" };
                let _ = writeln!(out, "{status} {:<22} {}", c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Version => {
            println!("claw {}", version_string());
            ExitCode::SUCCESS
        }
    }
}

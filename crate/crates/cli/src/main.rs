use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use turbo_aggregate_cli::{cmd_bounds, cmd_run, cmd_schedule, cmd_verify, RunMode, RunSpec};

#[derive(Parser)]
#[command(name = "turbo-aggregate", version, about = "Secure aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write the metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV path; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the sweep to one mode.
        #[arg(long)]
        mode: Option<RunMode>,
        /// Exit nonzero if any round aborts.
        #[arg(long)]
        strict: bool,
    },
    /// Check every mode against the direct sum at small dimension.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the bound report for the `[bounds]` grid of a config.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the tree schedule for L groups.
    Schedule { groups: usize },
}

fn run(cli: Cli) -> Result<i32> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            mode,
            strict,
        } => {
            let mut spec = RunSpec::load(&config)?;
            if let Some(out) = out {
                spec.output = Some(out);
            }
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if let Some(mode) = mode {
                spec.sweep.mode = vec![mode];
            }
            spec.strict |= strict;
            cmd_run(&spec, &mut stdout)
        }
        Command::Verify { config, seed } => {
            let from_file = match config {
                Some(path) => RunSpec::load(&path)?.seed,
                None => 0,
            };
            cmd_verify(seed.unwrap_or(from_file), &mut stdout)
        }
        Command::Bounds { config, seed } => {
            let mut spec = RunSpec::load(&config)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            cmd_bounds(&spec, &mut stdout)
        }
        Command::Schedule { groups } => cmd_schedule(groups, &mut stdout),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

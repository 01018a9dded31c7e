use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use psmaddpg::{parse_config, run, run_seeds, CliError, Mode};

/// Train MADDPG and its parameter-sharing variants on particle environments.
#[derive(Debug, Parser)]
#[command(name = "psmaddpg", version)]
struct Args {
    /// `key = value` run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "train", value_parser = ["train", "compare"])]
    mode: String,
    /// Comma-separated seeds; each runs into `<out>/seed_<seed>`.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Existing output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        None => String::new(),
    };
    let mut spec = parse_config(&text)?;
    if let Some(out) = &args.out {
        spec.out = Some(out.clone());
    }
    let mode: Mode = args.mode.parse().map_err(|e: String| CliError::config(0, e))?;
    if args.seeds.is_empty() {
        run(&spec, mode)
    } else {
        run_seeds(&spec, mode, &args.seeds)
    }
}

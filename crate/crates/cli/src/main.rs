//! `climrisk`: synthesize data, fit two-stage models, compare model kinds
//! and project climate scenarios.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "climrisk", version, about = "Climate-driven insurance claims and loss projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic daily control CSV and scenario CSVs.
    Synth(Common),
    /// Fit the two-stage model on the control data.
    Fit(Common),
    /// Fit ANN, SVR and GA-SVR and tabulate their training RMSE.
    Compare(Common),
    /// Project scenarios through a fitted model.
    Project(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any configuration key as `--section.key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let (cmd, common): (fn(&RunConfig) -> Result<Vec<PathBuf>, Failure>, Common) = match cli.command {
        Command::Synth(c) => (commands::synth, c),
        Command::Fit(c) => (commands::fit, c),
        Command::Compare(c) => (commands::compare, c),
        Command::Project(c) => (commands::project, c),
    };
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if let Some(out) = common.out {
        // Command-line paths are relative to the working directory.
        cfg.out = Some(std::path::absolute(&out).unwrap_or(out));
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

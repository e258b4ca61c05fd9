use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smoothlot_cli::{run_command, Command, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "smoothlot", version, about = "Smooth partial lotteries: marginals, sampling and smoothness experiments")]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Absolute budget.
    #[arg(long, conflicts_with = "rate")]
    k: Option<usize>,

    /// Budget as a fraction of candidates, rounded half up.
    #[arg(long)]
    rate: Option<f64>,

    /// Target smoothness; replaces any slope or temperature in the config.
    #[arg(long)]
    smoothness: Option<f64>,
}

fn run(args: Args) -> Result<Vec<PathBuf>, smoothlot_cli::CliError> {
    let mut config = RunConfig::load(&args.config)?;
    config.apply(&Overrides {
        seed: args.seed,
        out: args.out,
        k: args.k,
        rate: args.rate,
        smoothness: args.smoothness,
    });
    run_command(&config, args.command)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

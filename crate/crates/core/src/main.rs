use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use deepstate::cli::{run_command, Invocation, Verb};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Fit the model and write a checkpoint and loss history
    Train,
    /// Sample forecasts past the last observation and export quantiles
    Forecast,
    /// Rolling-window CRPS backtest
    Evaluate,
    /// Learned relevance weight of each exogenous variable
    Relevance,
}

#[derive(Debug, Parser)]
#[command(name = "deepstate", version, about = "Deep state space forecasting")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint to write (train) or read (other commands)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let verb = match args.command {
        Command::Train => Verb::Train,
        Command::Forecast => Verb::Forecast,
        Command::Evaluate => Verb::Evaluate,
        Command::Relevance => Verb::Relevance,
    };
    let invocation = Invocation {
        verb,
        config: args.config,
        checkpoint: args.checkpoint,
        seed: args.seed,
        out: args.out,
    };
    match run_command(&invocation, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

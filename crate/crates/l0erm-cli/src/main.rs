use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use l0erm_cli::commands::{cmd_experiment, cmd_fit, cmd_simulate, cmd_theory, FitArgs, TheoryArgs};
use l0erm_cli::{init_workers, CliError};

#[derive(Parser)]
#[command(name = "l0erm", version, about = "Exact sparse binary classification")]
struct Cli {
    /// Worker threads for the Monte Carlo loop (0 or unset = all cores).
    #[arg(long, global = true, env = "L0ERM_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate per-repetition train/validation CSVs and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit one method on a dataset CSV and emit JSON-lines results.
    Fit(FitArgs),
    /// Run the full Monte Carlo comparison and write all artifacts.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate the finite-sample guarantees at given constants.
    Theory(TheoryArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { config, out_dir } => {
            cmd_simulate(config, out_dir)?;
        }
        Command::Fit(args) => cmd_fit(args)?,
        Command::Experiment { config, out_dir } => {
            let table = cmd_experiment(config, out_dir)?;
            print!("{table}");
        }
        Command::Theory(args) => {
            let text = cmd_theory(args)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    init_workers(cli.workers);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

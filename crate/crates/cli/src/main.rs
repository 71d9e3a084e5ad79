use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphflow_cli::{execute, load_config, CliError, Command};

#[derive(Parser)]
#[command(name = "graphflow", version, about = "Two-species interaction dynamics on finite graphs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the dynamics from an explicit setup or a named scenario.
    Simulate(Common),
    /// List the stationary states of a two-vertex problem.
    Classify(Common),
    /// Energy and velocity field on a grid over the two-vertex state square.
    Portrait(Common),
    /// Brute-force energy minimisation on a small graph.
    Minimize(Common),
    /// Evaluate the aggregation and segregation conditions for a kernel set.
    Check(Common),
    /// Run a named scenario and evaluate its built-in expectations.
    Scenario(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the files written.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn run(command: Command, args: &Common) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("graphflow-out"));
    let summary = execute(command, &config, &out)?;
    println!("{}: {}", command.name(), summary.message);
    if args.verbose > 0 {
        for f in &summary.files {
            eprintln!("wrote {}", f.display());
        }
    }
    match summary.aborted {
        Some(reason) => Err(CliError::Numerical(format!("integration aborted: {reason}"))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Classify(a) => (Command::Classify, a),
        Cmd::Portrait(a) => (Command::Portrait, a),
        Cmd::Minimize(a) => (Command::Minimize, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Scenario(a) => (Command::Scenario, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

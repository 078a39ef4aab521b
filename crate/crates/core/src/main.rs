use std::path::PathBuf;
use std::process::ExitCode;

use anomaly::cli_io::{configure_threads, execute, Command, ExitStatus, Invocation, VerifyHooks};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anomaly", version, about = "Anomaly flow verification, symbol analysis and time integration")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file (schema version 1).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports, CSV files and snapshots.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the property suites.
    Verify(Common),
    /// Tabulate the restricted symbol over a list of α′.
    Symbol(Common),
    /// Integrate the Fu–Yau scalar flow.
    FlowFuyau(Common),
    /// Integrate the reduced torus flow.
    FlowTorus(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { ExitStatus::InputError.code() } else { ExitStatus::Success.code() };
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(ExitStatus::InputError.code() as u8);
    }
    let (command, common) = match cli.command {
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Symbol(c) => (Command::Symbol, c),
        Sub::FlowFuyau(c) => (Command::FlowFuyau, c),
        Sub::FlowTorus(c) => (Command::FlowTorus, c),
    };
    let inv = Invocation { command, config: common.config, seed: common.seed, out: common.out };
    ExitCode::from(execute(&inv, &VerifyHooks::default()).code() as u8)
}

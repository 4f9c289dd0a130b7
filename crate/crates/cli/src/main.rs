//! `modnet`: test networks for community structure and run the Monte Carlo
//! studies behind the reference laws.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use modnet::Error;

#[derive(Debug, Parser)]
#[command(
    name = "modnet",
    version,
    about = "Modularity tests for weighted networks"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct GlobalArgs {
    /// Root seed of every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Monte Carlo replicates per cell.
    #[arg(long, global = true, default_value_t = 2000)]
    reps: usize,

    /// Worker threads; 0 uses one per processor.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,

    /// Output format. Studies default to csv, `test` and `analyze` to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate the null laws against simulated null networks.
    Simulate(commands::SimulateArgs),
    /// Power (or, with --null, type I error) of the four tests.
    Power(commands::PowerArgs),
    /// Correlation of A_n with B_n and of Q/n with the scaled λ1.
    Correlate(commands::CorrelateArgs),
    /// Distributions of the raw and normalized modularities.
    Compare(commands::CompareArgs),
    /// Quantiles of a reference law.
    Quantiles(commands::QuantilesArgs),
    /// Run one test on a matrix file.
    Test(commands::TestArgs),
    /// Build a network from observations and split it recursively.
    Analyze(commands::AnalyzeArgs),
    /// Generate a Tracy–Widom table.
    #[command(name = "tw1-table")]
    Tw1Table(commands::Tw1TableArgs),
}

/// Failures mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!(
                "error: cannot start {} worker threads: {e}",
                cli.global.threads
            );
            return ExitCode::from(1);
        }
    };
    match pool.install(|| commands::dispatch(&cli.global, &cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                Error::InvalidParameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

//! `twosided`: capacity, rate distortion, special-case checks, binning
//! simulations and the channel/source correspondence from the command line.
//!
//! Exit codes: 0 ok, 1 I/O, 2 malformed input, 3 validation, 4 infeasible
//! distortion, 5 search budget or memory guard.

mod commands;
mod error;
mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twosided::special::{AvailabilityPattern, ProblemKind};

use commands::{CapacityCmd, Common, Output, RdMode, SimulateCmd};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "twosided",
    version,
    about = "Capacity and rate distortion with two-sided state information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Auxiliary alphabet size; defaults to the spec file, then the
    /// cardinality bound.
    #[arg(long)]
    u_size: Option<usize>,
    /// Starting points per inner solve.
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed for every random choice; overrides the spec file.
    #[arg(long, env = "TWOSIDED_SEED")]
    seed: Option<u64>,
    /// Append CSV rows here (header written when the file is new).
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl SolverArgs {
    fn common(&self) -> Common {
        Common {
            u_size: self.u_size,
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity of a channel spec.
    Capacity {
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also run the exhaustive grid oracle.
        #[arg(long)]
        oracle: bool,
        /// Oracle grid step (1/delta must be an integer).
        #[arg(long, requires = "oracle")]
        delta: Option<f64>,
        /// Oracle evaluation budget.
        #[arg(long, requires = "oracle")]
        max_points: Option<u64>,
    },
    /// Rate-distortion point or curve of a source spec.
    #[command(group = clap::ArgGroup::new("mode").required(true).args(["d", "sweep", "lambdas"]))]
    Rd {
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Target distortion.
        #[arg(long)]
        d: Option<f64>,
        /// Trace the curve with this many log-spaced multipliers.
        #[arg(long)]
        sweep: Option<usize>,
        /// Trace the curve with these multipliers.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// General solver against the classical formula for one availability
    /// pattern; the spec's state pair is treated as a single state.
    Reduce {
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Sender digit then receiver digit: 00, 01, 10 or 11.
        #[arg(long)]
        pattern: String,
        /// Target distortion (source specs).
        #[arg(long)]
        d: Option<f64>,
    },
    /// Monte Carlo run of a random binning code.
    Simulate {
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Blocklengths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Message rate in bits (channel specs).
        #[arg(long)]
        rate: Option<f64>,
        /// Target distortion (source specs).
        #[arg(long)]
        d: Option<f64>,
        /// Bin rate in bits (source specs); defaults to the solved point.
        #[arg(long)]
        bin_rate: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Typicality slack; defaults to the spec file, then 0.1.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Largest codebook, in stored symbols.
        #[arg(long)]
        max_symbols: Option<usize>,
    },
    /// Channel/source correspondence table.
    Duality {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(Output, Option<PathBuf>), CliError> {
    match cli.command {
        Command::Capacity {
            spec,
            solver,
            oracle,
            delta,
            max_points,
        } => {
            let s = spec::load(&spec)?;
            let cmd = CapacityCmd {
                common: solver.common(),
                oracle,
                delta,
                max_points,
            };
            Ok((commands::capacity(&s, &cmd)?, solver.csv))
        }
        Command::Rd {
            spec,
            solver,
            d,
            sweep,
            lambdas,
        } => {
            let mode = match (d, sweep, lambdas) {
                (Some(d), _, _) => RdMode::Point(d),
                (_, Some(n), _) => RdMode::sweep_count(n)?,
                (_, _, Some(l)) => RdMode::Sweep(l),
                _ => unreachable!("clap requires one mode"),
            };
            let s = spec::load(&spec)?;
            Ok((commands::rd(&s, &solver.common(), &mode)?, solver.csv))
        }
        Command::Reduce {
            spec,
            solver,
            pattern,
            d,
        } => {
            let pattern: AvailabilityPattern = pattern
                .parse()
                .map_err(|e: twosided::Error| CliError::invalid("--pattern", e.to_string()))?;
            let s = spec::load(&spec)?;
            Ok((
                commands::reduce(&s, &solver.common(), pattern, d)?,
                solver.csv,
            ))
        }
        Command::Simulate {
            spec,
            solver,
            n,
            rate,
            d,
            bin_rate,
            trials,
            epsilon,
            max_symbols,
        } => {
            let s = spec::load(&spec)?;
            let cmd = SimulateCmd {
                common: solver.common(),
                n,
                rate,
                d,
                bin_rate,
                trials,
                epsilon,
                max_symbols,
            };
            Ok((commands::simulate_cmd(&s, &cmd)?, solver.csv))
        }
        Command::Duality { kind, csv } => {
            let kind: ProblemKind = kind
                .parse()
                .map_err(|e: twosided::Error| CliError::invalid("--kind", e.to_string()))?;
            Ok((commands::duality(kind)?, csv))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(cli).and_then(|(out, csv)| {
        if let (Some(path), Some(table)) = (csv, &out.table) {
            table.append_to(&path)?;
        }
        Ok(out)
    });
    match outcome {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `gyra`: JSON-configured analyses of overdamped two-bath gyrator models
//! with JSON/CSV results.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 non-convergence. Failures print a machine-readable JSON object to
//! stderr.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod document;
mod error;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{CommandName, OutputFormat};
use crate::error::{io_err, CliError};
use crate::run::CommandOutput;

#[derive(Parser)]
#[command(
    name = "gyra",
    version,
    about = "Steady-state power analyses of two-temperature gyrator models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary covariance, optimal load, and maximum power report.
    Ness(RunArgs),
    /// Optimal skew load with analytic heat rates.
    OptimalLoad(RunArgs),
    /// Power along the load fraction sweep P(alpha) = 4 P* alpha (1 - alpha).
    Sweep(RunArgs),
    /// Euler-Maruyama ensemble estimates of power, heat, and covariance.
    Simulate(RunArgs),
    /// Covariance relaxation integrated by a classical one-step method.
    Transient(RunArgs),
    /// RC-network embodiment: steady state, power, and network design.
    Circuit(RunArgs),
    /// Grid pipeline: confining potential, force fields, quadrature power.
    Field(RunArgs),
}

impl Command {
    fn name(&self) -> CommandName {
        match self {
            Command::Ness(_) => CommandName::Ness,
            Command::OptimalLoad(_) => CommandName::OptimalLoad,
            Command::Sweep(_) => CommandName::Sweep,
            Command::Simulate(_) => CommandName::Simulate,
            Command::Transient(_) => CommandName::Transient,
            Command::Circuit(_) => CommandName::Circuit,
            Command::Field(_) => CommandName::Field,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Ness(a)
            | Command::OptimalLoad(a)
            | Command::Sweep(a)
            | Command::Simulate(a)
            | Command::Transient(a)
            | Command::Circuit(a)
            | Command::Field(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Path of the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Result format; default: csv for sweep, json otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Override the simulation seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the GYRA_THREADS environment variable.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let clock = Instant::now();
    let code = match execute(&cli) {
        Ok(()) => 0,
        Err(error) => {
            eprintln!("{}", error.to_json());
            error.exit_code()
        }
    };
    eprintln!("wall_time_total_seconds: {}", clock.elapsed().as_secs_f64());
    std::process::exit(code);
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let command = cli.command.name();
    let args = cli.command.args();

    configure_threads(args.threads)?;

    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| io_err(&format!("reading {}", args.config.display()), e))?;
    let mut config = config::parse_config(&text)?;

    if let Some(declared) = config.command {
        if declared != command {
            return Err(CliError::Usage {
                message: format!(
                    "config declares command \"{}\" but the \"{}\" subcommand was invoked",
                    declared.as_str(),
                    command.as_str()
                ),
            });
        }
    }
    config.command = Some(command);

    if let Some(seed) = args.seed {
        match &mut config.simulation {
            Some(sim) => sim.seed = seed,
            None => {
                return Err(CliError::Usage {
                    message: "--seed requires a simulation section in the config".to_string(),
                });
            }
        }
    }

    config::require_sections(&config, command)?;

    let format = args
        .format
        .map(OutputFormat::from)
        .or_else(|| config.output.as_ref().and_then(|o| o.format))
        .unwrap_or(match command {
            CommandName::Sweep => OutputFormat::Csv,
            _ => OutputFormat::Json,
        });
    let out_path = args.out.clone().or_else(|| {
        config
            .output
            .as_ref()
            .and_then(|o| o.path.as_ref())
            .map(PathBuf::from)
    });

    let CommandOutput { document, table } = run::run_command(command, config)?;

    let rendered = match format {
        OutputFormat::Json => document.to_json(),
        OutputFormat::Csv => {
            let table = table.ok_or_else(|| CliError::Usage {
                message: format!(
                    "the {} command has no tabular form; use --format json",
                    command.as_str()
                ),
            })?;
            table.render()
        }
    };

    match out_path {
        Some(path) => std::fs::write(&path, rendered)
            .map_err(|e| io_err(&format!("writing {}", path.display()), e))?,
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            handle
                .write_all(rendered.as_bytes())
                .map_err(|e| io_err("writing stdout", e))?;
        }
    }
    Ok(())
}

/// Worker-thread precedence: --threads flag, then GYRA_THREADS, then the
/// library default. The pool is process-global and configured once.
fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let from_env = match std::env::var("GYRA_THREADS") {
        Ok(text) => Some(text.parse::<usize>().map_err(|_| CliError::Usage {
            message: format!("GYRA_THREADS must be a positive integer, got \"{text}\""),
        })?),
        Err(_) => None,
    };
    let threads = flag.or(from_env);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage {
                message: "thread count must be at least 1".to_string(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage {
                message: format!("thread pool configuration failed: {e}"),
            })?;
    }
    Ok(())
}

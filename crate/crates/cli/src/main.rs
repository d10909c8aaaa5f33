//! `claimlot` command-line interface.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use claimlot::uncertain::{Method, PoolMode};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(e: impl fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<claimlot::Error> for CliError {
    fn from(e: claimlot::Error) -> Self {
        match e {
            claimlot::Error::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "claimlot", version, about = "Claims-based randomized allocation experiments")]
struct Cli {
    /// TOML configuration file; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolArg {
    Unweighted,
    Weighted,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Known-claims Monte Carlo experiments.
    Simulate {
        /// `top_k`, `bf`, `unweighted` or `partial_bf:<k'/k>:<n'/n>`; repeatable.
        #[arg(long, value_delimiter = ',')]
        mechanism: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        selection_rate: Vec<f64>,
        /// With --nprime-rate, adds a partial BF mechanism.
        #[arg(long, requires = "nprime_rate")]
        kprime_rate: Option<f64>,
        #[arg(long, requires = "kprime_rate")]
        nprime_rate: Option<f64>,
        /// Sweep the partial BF grid and write a frontier.
        #[arg(long)]
        sweep: bool,
    },
    /// Predicted-claims allocation study on a CSV dataset.
    Allocate {
        #[arg(long)]
        data: Option<PathBuf>,
        /// `top_k`, `boundary`, `variance` or `outlier`; repeatable.
        #[arg(long, value_delimiter = ',')]
        mechanism: Vec<String>,
        /// `lr`, `dt` or `rf`; repeatable.
        #[arg(long, value_delimiter = ',')]
        model: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        bootstrap_b: Option<usize>,
        #[arg(long)]
        bootstrap_fraction: Option<f64>,
        #[arg(long)]
        kprime_rate: Option<f64>,
        #[arg(long)]
        nprime_rate: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        selection_rate: Vec<f64>,
        /// Outlier lottery pool weighting.
        #[arg(long, value_enum)]
        mode: Option<PoolArg>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Also run the SER tradeoff with this many decision-makers.
        #[arg(long)]
        ser_m: Option<usize>,
    },
    /// SER of a binary outcomes CSV (one column per decision-maker).
    Audit {
        input: PathBuf,
        #[arg(long)]
        group_by: Option<String>,
    },
    /// Prints the resolved configuration as TOML.
    PrintConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        claimlot::par::configure_threads(t);
    }
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Simulate {
            mechanism,
            selection_rate,
            kprime_rate,
            nprime_rate,
            sweep,
        } => {
            let sim = &mut cfg.simulate;
            if !mechanism.is_empty() {
                sim.mechanisms = mechanism;
            }
            if !selection_rate.is_empty() {
                sim.selection_rates = selection_rate;
            }
            if let (Some(kr), Some(nr)) = (kprime_rate, nprime_rate) {
                sim.mechanisms.push(format!("partial_bf:{kr}:{nr}"));
            }
            sim.sweep |= sweep;
            commands::cmd_simulate(&cfg, &cli.out_dir).map(|_| ())
        }
        Command::Allocate {
            data,
            mechanism,
            model,
            alpha,
            bootstrap_b,
            bootstrap_fraction,
            kprime_rate,
            nprime_rate,
            selection_rate,
            mode,
            repetitions,
            iterations,
            ser_m,
        } => {
            let a = &mut cfg.allocate;
            if let Some(d) = data {
                a.data = Some(d);
            }
            if !mechanism.is_empty() {
                a.methods = mechanism
                    .iter()
                    .map(|m| m.parse::<Method>().map_err(CliError::usage))
                    .collect::<Result<_, _>>()?;
            }
            if !model.is_empty() {
                a.models = model;
            }
            if !alpha.is_empty() {
                a.alphas = alpha;
            }
            if !selection_rate.is_empty() {
                a.selection_rates = selection_rate;
            }
            a.bootstrap_b = bootstrap_b.unwrap_or(a.bootstrap_b);
            a.bootstrap_fraction = bootstrap_fraction.unwrap_or(a.bootstrap_fraction);
            a.kprime_rate = kprime_rate.unwrap_or(a.kprime_rate);
            a.nprime_rate = nprime_rate.or(a.nprime_rate);
            a.repetitions = repetitions.unwrap_or(a.repetitions);
            a.iterations = iterations.unwrap_or(a.iterations);
            a.ser_m = ser_m.unwrap_or(a.ser_m);
            if let Some(m) = mode {
                a.pool_mode = match m {
                    PoolArg::Unweighted => PoolMode::Unweighted,
                    PoolArg::Weighted => PoolMode::Weighted,
                };
            }
            if cfg.schema.label.is_empty() {
                return Err(CliError::Usage("the [schema] section needs a label column".into()));
            }
            commands::cmd_allocate(&cfg, &cli.out_dir).map(|_| ())
        }
        Command::Audit { input, group_by } => {
            commands::cmd_audit(&cfg, &input, group_by.as_deref(), &cli.out_dir).map(|_| ())
        }
        Command::PrintConfig => {
            print!("{}", config::render(&cfg));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

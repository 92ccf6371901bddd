//! The `gnet` command-line runner.
//!
//! Every command exits with 0 on success, 1 when the work itself failed
//! (training error, dimension mismatch, an oracle check that did not pass)
//! and 2 for usage errors (bad flags, unreadable or invalid config, missing
//! files, oracle guard violations).

mod config;
mod error;
mod eval;
mod gen;
mod model;
mod oracle;
mod output;
mod random;
mod train;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{DatasetRef, EdgeTopology, EsqnBlock, OutputPaths, RunConfig, TaskSpec, Topology};
pub use error::{CliError, CliResult, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use model::EsqnFile;
pub use oracle::{CtmcConfig, GradcheckConfig, QueueNetwork};
pub use output::write_atomic;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "GNET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gnet", version, about = "Random neural networks (G-networks): train, evaluate, generate data, check against oracles")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an RNN or an ESQN from a JSON run config.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed overriding the config's.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a trained model on a CSV file.
    Eval {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        data: PathBuf,
        /// Input columns (RNN) or the series column (ESQN); defaults to the
        /// names stored with the model.
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Write the metrics JSON here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a trained model's predictions for a CSV file.
    Predict {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a task dataset as CSV: xor, parity:N, sine:N, fm_sine:N[:NOISE].
    Gen {
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Window the fm_sine series into lagged rows.
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic code paths against independent ground truth.
    Oracle {
        #[command(subcommand)]
        kind: OracleCommand,
    },
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Analytic gradients against central finite differences on a random network.
    Gradcheck {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Truncated-CTMC marginals against the fixed point and the geometric law.
    Ctmc {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Truncated-CTMC joint law against the product of geometric marginals.
    Productform {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> CliResult<()> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else { return Ok(()) };
    let n = raw
        .to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, out, seed } => train::cmd_train(&config, out, seed, cli.verbose),
        Command::Eval { model, data, inputs, targets, out } => eval::cmd_eval(&model, &data, &inputs, &targets, out.as_deref()),
        Command::Predict { model, data, inputs, out } => eval::cmd_predict(&model, &data, &inputs, out.as_deref()),
        Command::Gen { task, seed, lag, horizon, out } => gen::cmd_gen(&task, seed, lag, horizon, out.as_deref()),
        Command::Oracle { kind } => match kind {
            OracleCommand::Gradcheck { config, seed, out } => oracle::cmd_gradcheck(config.as_deref(), seed, out.as_deref()),
            OracleCommand::Ctmc { config, out } => oracle::cmd_ctmc(&config, out.as_deref()),
            OracleCommand::Productform { config, out } => oracle::cmd_productform(&config, out.as_deref()),
        },
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

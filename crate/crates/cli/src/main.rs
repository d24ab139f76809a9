//! Command-line pipeline for event-based HDR imaging: scene generation,
//! event simulation, correction-map calibration, reconstruction, evaluation
//! and parameter sweeps, all driven by one TOML configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CommandContext;
use config::RunConfig;

/// Exit codes: 0 success, 2 configuration/validation, 3 I/O or file format,
/// 4 numerical failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    fn io(message: String) -> Self {
        CliError { code: 3, message }
    }
}

impl From<evhdr::Error> for CliError {
    fn from(e: evhdr::Error) -> Self {
        let code = match &e {
            evhdr::Error::Domain(_) | evhdr::Error::Argument(_) => 2,
            evhdr::Error::Format { .. } | evhdr::Error::Io { .. } => 3,
            evhdr::Error::Numerical(_) => 4,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "evhdr",
    version,
    about = "Event-camera HDR imaging: modulated-light simulation and temporal-weighted reconstruction"
)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the noise seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides `[output].dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread count. Results are byte-identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured scene and write it as a float image.
    Chart,
    /// Simulate the configured scene into an event stream.
    Simulate,
    /// Estimate a per-pixel correction map from uniform captures.
    Calibrate {
        /// Number of uniform captures (overrides `[calibration].captures`).
        #[arg(long)]
        captures: Option<usize>,
    },
    /// Decode an event-stream file into a radiance image.
    Reconstruct {
        /// Binary event-stream file to decode.
        stream: PathBuf,
    },
    /// Run the SNR / dynamic-range / monotonicity evaluation suite.
    Evaluate,
    /// Sweep the exponential weighting factor and record mean SNR per k.
    SweepK {
        /// Comma-separated k values (overrides `[sweep].k_values`).
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<u32>>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    let ctx = CommandContext {
        out_dir: config.output.dir.clone(),
        config,
        threads: cli.threads,
    };

    let go = || match &cli.command {
        Command::Chart => commands::cmd_chart(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Calibrate { captures } => commands::cmd_calibrate(&ctx, *captures),
        Command::Reconstruct { stream } => commands::cmd_reconstruct(&ctx, stream),
        Command::Evaluate => commands::cmd_evaluate(&ctx),
        Command::SweepK { k_values } => commands::cmd_sweep_k(&ctx, k_values.clone()),
    };

    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(format!("cannot build thread pool: {e}")))?;
            pool.install(go)
        }
        None => go(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

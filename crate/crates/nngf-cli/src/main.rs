//! `nngf` — experiment driver for deep-limit analysis of neural-network
//! Gaussian fields on the sphere.

mod commands;
mod config;
mod emit;

use clap::{Parser, Subcommand, ValueEnum};
use config::{load_config, ExperimentConfig, KernelSpec};
use nngf::kernel::Kernel;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad input (config, flags, kernel spec) — exit code 2.
    Validation(String),
    /// Everything else — exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn validation<E: std::fmt::Display>(e: E) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime<E: std::fmt::Display>(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(name = "nngf", version, about = "Iterated-kernel Gaussian fields: spectra, chaos expansions and Monte Carlo verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON, versioned schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV/SVG artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = library default); NNGF_WORKERS as fallback.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a kernel, or report derivative and boundary-expansion fit.
    Kernel {
        #[arg(long)]
        kind: Option<String>,
        /// Comma-separated power-series coefficients (index = degree).
        #[arg(long)]
        series: Option<String>,
        /// Inner product in [-1, 1] to evaluate at.
        #[arg(long, allow_hyphen_values = true)]
        probe: Option<f64>,
    },
    /// Classify the disorder regime and print its parameters as JSON.
    Regime {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        series: Option<String>,
    },
    /// Angular power spectrum C_l and normalized modes across depths.
    Spectrum {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        series: Option<String>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<usize>,
    },
    /// Moments of the normalized kernel across a depth schedule.
    Moments {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        series: Option<String>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        depths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        q: Vec<usize>,
    },
    /// Draw functional replicates from a config and emit them as CSV.
    Simulate,
    /// Full pipeline: predict, simulate, test; one verdict per check.
    Experiment,
    /// Self-checks: regime, spectral mass, grid weights, determinism.
    Verify,
}

fn parse_series(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("bad series coefficient '{tok}'")))
        })
        .collect()
}

/// Kernel resolution order: --series, --kind, then the config file.
fn resolve_kernel(
    kind: &Option<String>,
    series: &Option<String>,
    config: &Option<PathBuf>,
) -> Result<Kernel, CliError> {
    if let Some(s) = series {
        return KernelSpec::Series {
            coeffs: parse_series(s)?,
        }
        .build();
    }
    if let Some(k) = kind {
        return match k.as_str() {
            "relu" => Ok(Kernel::relu()),
            other => Err(CliError::Validation(format!("unknown kernel kind '{other}'"))),
        };
    }
    if let Some(path) = config {
        let (cfg, _) = load_config(path)?;
        return cfg.kernel.build();
    }
    Err(CliError::Validation(
        "no kernel given: pass --kind, --series or --config".into(),
    ))
}

fn require_config(config: &Option<PathBuf>) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    match config {
        Some(path) => load_config(path),
        None => Err(CliError::Validation(
            "this subcommand requires --config".into(),
        )),
    }
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("NNGF_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let workers = resolve_workers(cli.workers);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Kernel { kind, series, probe } => {
            let kernel = resolve_kernel(kind, series, &cli.config)?;
            commands::cmd_kernel(&kernel, *probe, cli.format, out)
        }
        Command::Regime { kind, series } => {
            let kernel = resolve_kernel(kind, series, &cli.config)?;
            commands::cmd_regime(&kernel)
        }
        Command::Spectrum {
            kind,
            series,
            d,
            depths,
        } => {
            let kernel = resolve_kernel(kind, series, &cli.config)?;
            commands::cmd_spectrum(&kernel, *d, depths, cli.format, out)
        }
        Command::Moments {
            kind,
            series,
            d,
            depths,
            q,
        } => {
            let kernel = resolve_kernel(kind, series, &cli.config)?;
            commands::cmd_moments(&kernel, *d, depths, q, cli.format, out)
        }
        Command::Simulate => {
            let (config, bytes) = require_config(&cli.config)?;
            commands::cmd_simulate(&config, &bytes, cli.seed, workers, cli.format, out)
        }
        Command::Experiment => {
            let (config, bytes) = require_config(&cli.config)?;
            commands::cmd_experiment(&config, &bytes, cli.seed, workers, out)
        }
        Command::Verify => {
            let (config, _) = require_config(&cli.config)?;
            commands::cmd_verify(&config, cli.seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

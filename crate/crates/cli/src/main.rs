//! `nanonmr`: simulate, reconstruct and fit NV-detected NMR spectra of ice.
//!
//! Exit codes: 0 on success, 2 for invalid invocation or configuration,
//! 1 for any other failure (including a failing oracle check).

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "nanonmr", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the configuration file.
#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file; unspecified keys take their defaults.
    #[arg(long, global = true, env = "NANONMR_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    field_gauss: Option<f64>,
    #[arg(long, global = true)]
    alpha_deg: Option<f64>,
    #[arg(long, global = true)]
    beta_deg: Option<f64>,
    /// HDO fraction.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Sampling rate of the measurement chain (kHz).
    #[arg(long, global = true)]
    fs_khz: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Model spectrum, its undersampled time trace and the picked peaks.
    Simulate,
    /// Exact spin simulation of a correlation measurement.
    Correlate,
    /// Recover offsets from the Larmor frequency in an undersampled trace.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fit the crystal orientation to a spectrum.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Refine the HDO fraction as well.
        #[arg(long)]
        fit_p: bool,
    },
    /// Fit the HDO fraction at the configured orientation.
    Ratio {
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate the O–H bond length from spectra with known dimer angles.
    BondLength {
        /// PATH:theta=DEG or PATH:alpha=DEG,beta=DEG
        #[arg(required = true)]
        inputs: Vec<String>,
    },
    /// Weighted straight-line fit of resonance frequency against field.
    Slope {
        /// CSV with columns field_gauss,frequency_khz[,sigma_khz]. Without it,
        /// synthetic resonances are generated from the seed.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        through_origin: bool,
        /// Noise on the synthetic resonances (kHz).
        #[arg(long, default_value_t = 5.0)]
        noise_khz: f64,
    },
    /// Compare analytic dipolar splittings with exact diagonalisation.
    Oracle {
        #[arg(long, hide = true)]
        corrupt_delta: Option<f64>,
    },
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.out {
        cfg.out = v.clone();
    }
    if let Some(v) = g.field_gauss {
        cfg.field_gauss = v;
    }
    if let Some(v) = g.alpha_deg {
        cfg.alpha_deg = v;
    }
    if let Some(v) = g.beta_deg {
        cfg.beta_deg = v;
    }
    if let Some(v) = g.p {
        cfg.p = v;
    }
    if let Some(v) = g.fs_khz {
        cfg.fs_khz = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("NANONMR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError(format!("NANONMR_THREADS = '{v}' must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    let cfg = resolve_config(&cli.global)?;
    match &cli.command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Correlate => commands::correlate(&cfg)?,
        Command::Reconstruct { input } => commands::reconstruct_cmd(&cfg, input)?,
        Command::Fit { input, fit_p } => commands::fit(&cfg, input, *fit_p)?,
        Command::Ratio { input } => commands::ratio(&cfg, input)?,
        Command::BondLength { inputs } => commands::bond_length(&cfg, inputs)?,
        Command::Slope { input, through_origin, noise_khz } => {
            commands::slope(&cfg, input.as_deref(), *through_origin, *noise_khz)?
        }
        Command::Oracle { corrupt_delta } => return commands::oracle(&cfg, *corrupt_delta),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

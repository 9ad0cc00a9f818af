//! `eomc`: runs the NPP electro-optic Monte-Carlo model from a TOML config
//! and writes CSV and text reports.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{load, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "eomc", version, about = "Monte-Carlo model of the linear electro-optic effect in NPP")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo trials for every estimator.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (overrides paths.output_dir and EOMC_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Allow wavelengths outside the transparency window.
    #[arg(long, global = true)]
    pub force_wavelength: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Fit (epsilon, u, Z) to target indices and the field coupling to the figure of merit.
    Calibrate,
    /// Refractive index per wavelength and polarization.
    Dispersion,
    /// Phase retardation versus applied field.
    Retardation,
    /// Switch transfer curve and design report.
    Switch,
    /// Classical electro-optic quantities and the field-angle response.
    Eo,
    /// Unit and dimension checks.
    Selftest,
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Command::Selftest = cli.command {
        return commands::cmd_selftest();
    }
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        threads: cli.threads,
        out: cli.out.clone(),
        force_wavelength: cli.force_wavelength,
    };
    let loaded = load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Calibrate => commands::cmd_calibrate(&loaded),
        Command::Dispersion => commands::cmd_dispersion(&loaded),
        Command::Retardation => commands::cmd_retardation(&loaded),
        Command::Switch => commands::cmd_switch(&loaded),
        Command::Eo => commands::cmd_eo(&loaded),
        Command::Selftest => unreachable!("handled above"),
    }
}

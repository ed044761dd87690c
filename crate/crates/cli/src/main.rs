//! `cslbound` — batch front end for the force-noise inference toolkit.
//!
//! Subcommands mirror the analysis stages: collapse-noise scans, spectrum
//! fits, thermal fits, confidence limits, exclusion curves, multilayer
//! design scans, synthetic data generation and the end-to-end pipeline.
//! Every flag has a config-file equivalent (`--config`, JSON with the same
//! field names); flags take precedence. Each command writes a run manifest
//! with content hashes of its inputs and outputs.
//!
//! Exit codes: 0 ok, 2 input/parse error, 3 quadrature failure,
//! 4 fit non-convergence, 5 data-validation failure.
//!
//! `CSL_MAX_THREADS` caps the worker pool.

// Negated comparisons in validation guards reject NaN deliberately.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cmds;
mod dataset;
mod error;
mod manifest;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "cslbound", version, about = "Collapse-model force-noise inference toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collapse force-noise PSD of a geometry over correlation lengths.
    CslNoise(cmds::csl_noise::Args),
    /// Fit one averaged flux-noise spectrum.
    FitSpectrum(cmds::fit_spectrum::Args),
    /// Saturation and restricted linear fits of a B-vs-T/Q table.
    FitThermal(cmds::fit_thermal::Args),
    /// Feldman-Cousins upper limit for a non-negative Gaussian mean.
    FeldmanCousins(cmds::feldman_cousins::Args),
    /// Exclusion curve lambda_upper(rc) from a force-noise limit.
    Exclusion(cmds::exclusion::Args),
    /// Testable collapse rate per layer count; optional thickness optimum.
    DesignScan(cmds::design_scan::Args),
    /// Deterministic synthetic data.
    #[command(subcommand)]
    Synth(cmds::synth::SynthCommand),
    /// Full chain: spectra -> thermal fits -> limit -> exclusion curve.
    Pipeline(cmds::pipeline::Args),
}

fn main() {
    if let Ok(v) = std::env::var("CSL_MAX_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => cslbound::parallel::configure_threads(n),
            _ => {
                eprintln!("error: CSL_MAX_THREADS must be a positive integer, got '{v}'");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CslNoise(args) => cmds::csl_noise::run(args),
        Command::FitSpectrum(args) => cmds::fit_spectrum::run(args),
        Command::FitThermal(args) => cmds::fit_thermal::run(args),
        Command::FeldmanCousins(args) => cmds::feldman_cousins::run(args),
        Command::Exclusion(args) => cmds::exclusion::run(args),
        Command::DesignScan(args) => cmds::design_scan::run(args),
        Command::Synth(cmd) => cmds::synth::run(cmd),
        Command::Pipeline(args) => cmds::pipeline::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

/// Flag > config-file > default.
pub(crate) fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag > config-file, required.
pub(crate) fn pick_req<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Input(format!("missing required parameter '{name}' (flag or config file)")))
}

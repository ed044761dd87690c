//! `cslbound fit-thermal`: saturation fit over the full B-vs-T/Q table,
//! restricted linear fit above the crossover, non-thermal floor.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::io;
use cslbound::thermal::{self, LinearFitResult, SaturationFitResult};

use crate::dataset::ResonatorSpec;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    /// Thermal table (TSV: t_k, q, b, sigma_b).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Resonator calibration (JSON: stiffness, stiffness_sigma, f0, mass, phi_x).
    #[arg(long)]
    resonator: Option<PathBuf>,
    /// Keep only T >= this (K) for the linear fit.
    #[arg(long)]
    t_restrict: Option<f64>,
    /// Fractional error on x = T/Q.
    #[arg(long)]
    x_error_frac: Option<f64>,
    /// Saturation exponent.
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    data: Option<PathBuf>,
    resonator: Option<PathBuf>,
    t_restrict: Option<f64>,
    x_error_frac: Option<f64>,
    exponent: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct ThermalRecord {
    pub saturation: SaturationFitResult,
    pub linear: LinearFitResult,
    pub n_restricted: usize,
    pub t_restrict: f64,
    pub s_f0: f64,
    pub s_f0_sigma: f64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let data_path = pick_req(args.data, file.data, "data")?;
    let resonator_path = pick_req(args.resonator, file.resonator, "resonator")?;
    let out = pick_req(args.out, file.out, "out")?;
    let t_restrict = pick(args.t_restrict, file.t_restrict, 0.1);
    let x_frac = pick(args.x_error_frac, file.x_error_frac, 0.01);
    let exponent = pick(args.exponent, file.exponent, 4.0);

    let dataset = io::read_thermal(&data_path)?;
    let resonator: ResonatorSpec = io::read_json(&resonator_path)?;

    #[derive(Serialize)]
    struct Effective {
        t_restrict: f64,
        x_error_frac: f64,
        exponent: f64,
    }
    let mut builder = ManifestBuilder::new(
        "fit-thermal",
        &Effective {
            t_restrict,
            x_error_frac: x_frac,
            exponent,
        },
    );
    builder.record_input(&data_path)?;
    builder.record_input(&resonator_path)?;

    let saturation = thermal::fit_saturation(&dataset, Some(exponent))?;
    let restricted = dataset.restrict_above(t_restrict);
    let linear = thermal::fit_linear(&restricted, Some(x_frac))?;
    let (s_f0, s_f0_sigma) =
        thermal::nonthermal_psd(&linear, &resonator.params(), resonator.stiffness_sigma);

    let record = ThermalRecord {
        saturation,
        linear,
        n_restricted: restricted.points.len(),
        t_restrict,
        s_f0,
        s_f0_sigma,
    };
    io::write_json(&out, &record)?;
    builder.record_output(&out);
    builder.finish(&super::csl_noise::manifest_path(&out))?;

    println!(
        "crossover x_co = {} K{}",
        io::fmt_sci(record.saturation.params.x_co),
        if record.saturation.crossover_outside_data {
            "  (outside data range: unconstrained)"
        } else {
            ""
        }
    );
    println!(
        "linear fit (T >= {t_restrict} K, {} points): B0 = {} +- {}, B1 = {} +- {}, chi2/dof = {:.3}/{}",
        record.n_restricted,
        io::fmt_sci(record.linear.b0),
        io::fmt_sci(record.linear.sigma_b0()),
        io::fmt_sci(record.linear.b1),
        io::fmt_sci(record.linear.sigma_b1()),
        record.linear.chi2,
        record.linear.dof
    );
    println!(
        "S_F0 = {} +- {} N^2/Hz",
        io::fmt_sci(s_f0),
        io::fmt_sci(s_f0_sigma)
    );
    Ok(())
}

//! `cslbound feldman-cousins`: upper limit for a non-negative Gaussian
//! mean from a measured value and its error.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::io;
use cslbound::thermal::{feldman_cousins_interval, FcConfig};

use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    #[arg(long, allow_hyphen_values = true)]
    measured: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Confidence level in (0.5, 1).
    #[arg(long)]
    cl: Option<f64>,
    /// Belt grid step in sigma units.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Optional JSON record of the interval.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    measured: Option<f64>,
    sigma: Option<f64>,
    cl: Option<f64>,
    grid_step: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LimitRecord {
    measured: f64,
    sigma: f64,
    cl: f64,
    lower: f64,
    upper: f64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let measured = pick_req(args.measured, file.measured, "measured")?;
    let sigma = pick_req(args.sigma, file.sigma, "sigma")?;
    let cl = pick(args.cl, file.cl, 0.95);
    let mut cfg = FcConfig::default();
    if let Some(step) = args.grid_step.or(file.grid_step) {
        cfg.mu_step = step;
    }

    let (lower, upper) = feldman_cousins_interval(measured, sigma, cl, &cfg)?;
    let record = LimitRecord {
        measured,
        sigma,
        cl,
        lower,
        upper,
    };
    println!(
        "[{}, {}] at CL = {cl}",
        io::fmt_sci(lower),
        io::fmt_sci(upper)
    );
    if let Some(out) = &args.out.or(file.out) {
        let mut builder = ManifestBuilder::new("feldman-cousins", &record);
        io::write_json(out, &record)?;
        builder.record_output(out);
        builder.finish(&super::csl_noise::manifest_path(out))?;
    }
    Ok(())
}

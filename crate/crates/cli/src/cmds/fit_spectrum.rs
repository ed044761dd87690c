//! `cslbound fit-spectrum`: fit one averaged spectrum, write the fit
//! record (parameters, covariance, masked bins, residual check) as JSON.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::io;
use cslbound::spectral::{self, SpectralModelParams, DEFAULT_F1_PRIOR_SIGMA};

use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    /// Spectrum table (TSV with header).
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Metadata sidecar; defaults to `<spectrum>.meta.json`.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Apparent quality factor override (otherwise from metadata).
    #[arg(long)]
    qprime: Option<f64>,
    /// Reference antiresonance frequency (Hz) for the f1 anchor.
    #[arg(long)]
    f1_init: Option<f64>,
    #[arg(long)]
    f1_prior_sigma: Option<f64>,
    #[arg(long)]
    window_lo: Option<f64>,
    #[arg(long)]
    window_hi: Option<f64>,
    /// Output fit record (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero if the residual-distribution check fails.
    #[arg(long)]
    strict: bool,
    /// Print the masked bin indices.
    #[arg(long)]
    mask_report: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    spectrum: Option<PathBuf>,
    meta: Option<PathBuf>,
    qprime: Option<f64>,
    f1_init: Option<f64>,
    f1_prior_sigma: Option<f64>,
    window_lo: Option<f64>,
    window_hi: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FitRecord {
    spectrum: String,
    temperature_k: f64,
    q: f64,
    init: SpectralModelParams,
    fit: spectral::SpectralFitResult,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let spectrum_path = pick_req(args.spectrum, file.spectrum, "spectrum")?;
    let meta_path = args.meta.or(file.meta).unwrap_or_else(|| {
        let mut name = spectrum_path.file_stem().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        spectrum_path.with_file_name(name)
    });
    let out = pick_req(args.out, file.out, "out")?;

    let (spectrum, meta) = io::read_spectrum(&spectrum_path, &meta_path)?;
    let qprime = pick(args.qprime, file.qprime, meta.qprime);
    let mut init = spectral::default_init(&spectrum, qprime)?;
    if let Some(f1) = args.f1_init.or(file.f1_init) {
        init.f1 = f1;
    }
    let prior = pick(args.f1_prior_sigma, file.f1_prior_sigma, DEFAULT_F1_PRIOR_SIGMA);
    let window = match (
        args.window_lo.or(file.window_lo),
        args.window_hi.or(file.window_hi),
    ) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(CliError::Input(
                "window-lo and window-hi must be given together".into(),
            ))
        }
    };

    #[derive(Serialize)]
    struct Effective<'a> {
        spectrum: &'a str,
        qprime: f64,
        init: &'a SpectralModelParams,
        f1_prior_sigma: f64,
        window: Option<(f64, f64)>,
        strict: bool,
    }
    let spectrum_name = spectrum_path.display().to_string();
    let effective = Effective {
        spectrum: &spectrum_name,
        qprime,
        init: &init,
        f1_prior_sigma: prior,
        window,
        strict: args.strict,
    };
    let mut builder = ManifestBuilder::new("fit-spectrum", &effective);
    builder.record_input(&spectrum_path)?;
    builder.record_input(&meta_path)?;

    let fit = spectral::fit_spectrum_with(&spectrum, &init, window, prior)?;
    if fit.kept_bins.len() < 50 {
        return Err(CliError::Validation(format!(
            "too few usable bins: {} (need at least 50)",
            fit.kept_bins.len()
        )));
    }

    let record = FitRecord {
        spectrum: spectrum_name,
        temperature_k: meta.temperature_k,
        q: meta.q,
        init,
        fit: fit.clone(),
    };
    io::write_json(&out, &record)?;
    builder.record_output(&out);
    builder.finish(&super::csl_noise::manifest_path(&out))?;

    println!(
        "B = {} +- {}  chi2/dof = {:.4}  reweight iterations = {}",
        io::fmt_sci(fit.params.b),
        io::fmt_sci(fit.sigma(1)),
        fit.chi2 / fit.dof as f64,
        fit.reweight_iterations
    );
    if args.mask_report {
        println!("masked bins ({}): {:?}", fit.masked_bins.len(), fit.masked_bins);
    }
    match &fit.residual_test {
        Some(check) => {
            println!(
                "residual check: {} (p = {:.4}, {} bins)",
                if check.pass { "pass" } else { "FAIL" },
                check.p_value,
                check.n_bins
            );
            if args.strict && !check.pass {
                return Err(CliError::Validation(format!(
                    "residual distribution check failed (p = {:.4})",
                    check.p_value
                )));
            }
        }
        None => println!("residual check: skipped (needs 50 bins)"),
    }
    Ok(())
}

//! `cslbound pipeline`: the full inference chain over a dataset directory.
//!
//! Stages: per-temperature spectrum fits (worker pool), thermal table,
//! saturation fit (crossover), restricted linear fit, non-thermal floor,
//! Feldman-Cousins limit, exclusion curve. Every intermediate is
//! persisted; a stage failure leaves the partial outputs in place and
//! marks the failed stage in the manifest.

use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

use cslbound::csl::QuadConfig;
use cslbound::exclusion::{exclusion_curve, log_grid};
use cslbound::io;
use cslbound::mass::CompositeMass;
use cslbound::parallel;
use cslbound::spectral::{self, DEFAULT_F1_PRIOR_SIGMA};
use cslbound::thermal::{self, ThermalDataset, ThermalPoint};

use crate::dataset::DatasetConfig;
use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::pick;

#[derive(Parser)]
pub struct Args {
    /// Dataset directory containing dataset.json.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for fits, tables, curve and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Override the dataset's T restriction (K).
    #[arg(long)]
    t_restrict: Option<f64>,
    /// Fail (exit 5) if any per-spectrum residual check fails.
    #[arg(long)]
    strict: bool,
    /// Skip the exclusion-curve stage (thermal chain only).
    #[arg(long)]
    skip_exclusion: bool,
}

#[derive(Serialize)]
struct Summary {
    n_spectra: usize,
    crossover_x_co: f64,
    crossover_outside_data: bool,
    t_restrict: f64,
    n_restricted: usize,
    b0: f64,
    b0_sigma: f64,
    b1: f64,
    b1_sigma: f64,
    linear_chi2: f64,
    linear_dof: usize,
    s_f0: f64,
    s_f0_sigma: f64,
    cl: f64,
    s_upper: f64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let dataset_path = args.dataset.join("dataset.json");
    let config: DatasetConfig = io::read_json(&dataset_path)?;
    let t_restrict = pick(args.t_restrict, config.t_restrict, 0.1);
    let cl = config.cl.unwrap_or(0.95);

    std::fs::create_dir_all(args.out.join("fits"))?;
    let mut builder = ManifestBuilder::new("pipeline", &config);
    builder.record_input(&dataset_path)?;

    let manifest_path = args.out.join("manifest.json");
    match run_stages(&args, &config, t_restrict, cl, &mut builder) {
        Ok(()) => builder.finish(&manifest_path),
        Err((stage, err)) => {
            builder.finish_failed(&manifest_path, stage)?;
            Err(err)
        }
    }
}

fn run_stages(
    args: &Args,
    config: &DatasetConfig,
    t_restrict: f64,
    cl: f64,
    builder: &mut ManifestBuilder,
) -> Result<(), (&'static str, CliError)> {
    // ---- stage: ingest -------------------------------------------------
    let stage = "ingest";
    let geometry_path = args.dataset.join(&config.geometry);
    let geometry_text = std::fs::read_to_string(&geometry_path)
        .map_err(|e| (stage, CliError::Input(format!("{}: {e}", geometry_path.display()))))?;
    let geometry = CompositeMass::from_json(&geometry_text).map_err(|e| (stage, e.into()))?;
    builder.record_input(&geometry_path).map_err(|e| (stage, e))?;

    let spectra_dir = args.dataset.join(&config.spectra_dir);
    let mut tables: Vec<PathBuf> = std::fs::read_dir(&spectra_dir)
        .map_err(|e| (stage, CliError::Input(format!("{}: {e}", spectra_dir.display()))))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "tsv").unwrap_or(false))
        .collect();
    tables.sort();
    if tables.is_empty() {
        return Err((
            stage,
            CliError::Input(format!("no spectrum tables in {}", spectra_dir.display())),
        ));
    }
    let mut loaded = Vec::new();
    for path in &tables {
        let meta_path = super::synth::meta_path_for(path);
        let pair = io::read_spectrum(path, &meta_path).map_err(|e| (stage, e.into()))?;
        builder.record_input(path).map_err(|e| (stage, e))?;
        builder.record_input(&meta_path).map_err(|e| (stage, e))?;
        loaded.push((path.clone(), pair.0, pair.1));
    }

    // ---- stage: spectral fits ------------------------------------------
    let stage = "spectral-fits";
    let prior = config.fit.f1_prior_sigma.unwrap_or(DEFAULT_F1_PRIOR_SIGMA);
    let halfwidth = config.fit.window_halfwidth.unwrap_or(17.5);
    let fits: Vec<Result<(f64, f64, spectral::SpectralFitResult), spectral::SpectralError>> =
        parallel::map_ordered(&loaded, |(_, spectrum, meta)| {
            let mut init = spectral::default_init(spectrum, config.fit.qprime)?;
            if let Some(f1) = config.fit.f1_init {
                init.f1 = f1;
            }
            let window = (init.f0 - halfwidth, init.f0 + halfwidth);
            let fit = spectral::fit_spectrum_with(spectrum, &init, Some(window), prior)?;
            Ok((meta.temperature_k, meta.q, fit))
        });

    let mut points = Vec::new();
    for ((path, _, _), result) in loaded.iter().zip(fits) {
        let (t, q, fit) = result.map_err(|e| (stage, e.into()))?;
        if args.strict {
            if let Some(check) = &fit.residual_test {
                if !check.pass {
                    return Err((
                        stage,
                        CliError::Validation(format!(
                            "{}: residual check failed (p = {:.4})",
                            path.display(),
                            check.p_value
                        )),
                    ));
                }
            }
        }
        let record_path = args
            .out
            .join("fits")
            .join(format!(
                "{}.fit.json",
                path.file_stem().unwrap_or_default().to_string_lossy()
            ));
        io::write_json(&record_path, &fit).map_err(|e| (stage, e.into()))?;
        builder.record_output(&record_path);
        points.push(ThermalPoint {
            t,
            q,
            b: fit.params.b,
            sigma_b: fit.sigma(1),
        });
    }
    let thermal_data = ThermalDataset { points };
    let thermal_path = args.out.join("thermal.tsv");
    io::write_thermal(&thermal_path, &thermal_data).map_err(|e| (stage, e.into()))?;
    builder.record_output(&thermal_path);

    // ---- stage: crossover ----------------------------------------------
    let stage = "crossover-fit";
    let saturation = thermal::fit_saturation(&thermal_data, None).map_err(|e| (stage, e.into()))?;
    let sat_path = args.out.join("saturation.json");
    io::write_json(&sat_path, &saturation).map_err(|e| (stage, e.into()))?;
    builder.record_output(&sat_path);

    // ---- stage: linear fit ----------------------------------------------
    let stage = "linear-fit";
    let restricted = thermal_data.restrict_above(t_restrict);
    let linear = thermal::fit_linear(&restricted, config.x_error_frac)
        .map_err(|e| (stage, e.into()))?;
    let linear_path = args.out.join("linear.json");
    io::write_json(&linear_path, &linear).map_err(|e| (stage, e.into()))?;
    builder.record_output(&linear_path);

    // ---- stage: non-thermal floor + confidence limit ---------------------
    let stage = "confidence-limit";
    let (s_f0, s_f0_sigma) = thermal::nonthermal_psd(
        &linear,
        &config.resonator.params(),
        config.resonator.stiffness_sigma,
    );
    let s_upper = thermal::feldman_cousins_upper(s_f0, s_f0_sigma, cl)
        .map_err(|e| (stage, e.into()))?;

    let summary = Summary {
        n_spectra: loaded.len(),
        crossover_x_co: saturation.params.x_co,
        crossover_outside_data: saturation.crossover_outside_data,
        t_restrict,
        n_restricted: restricted.points.len(),
        b0: linear.b0,
        b0_sigma: linear.sigma_b0(),
        b1: linear.b1,
        b1_sigma: linear.sigma_b1(),
        linear_chi2: linear.chi2,
        linear_dof: linear.dof,
        s_f0,
        s_f0_sigma,
        cl,
        s_upper,
    };
    let summary_path = args.out.join("summary.json");
    io::write_json(&summary_path, &summary).map_err(|e| (stage, e.into()))?;
    builder.record_output(&summary_path);

    println!(
        "S_F0 = {} +- {} N^2/Hz; upper limit {} at CL = {}",
        io::fmt_sci(s_f0),
        io::fmt_sci(s_f0_sigma),
        io::fmt_sci(s_upper),
        cl
    );

    // ---- stage: exclusion curve ------------------------------------------
    if !args.skip_exclusion {
        let stage = "exclusion-curve";
        let grid = match &config.rc_grid {
            Some(g) => log_grid(g.min, g.max, g.points),
            None => log_grid(1e-9, 1e-4, 60),
        };
        let curve = exclusion_curve(
            &geometry,
            s_upper,
            &grid,
            cl,
            &QuadConfig::default_3d(),
            "dataset-geometry",
        )
        .map_err(|e| (stage, e.into()))?;
        let curve_path = args.out.join("curve.tsv");
        io::write_atomic(&curve_path, &io::curve_to_tsv(&curve)).map_err(|e| (stage, e.into()))?;
        builder.record_output(&curve_path);
        println!("exclusion curve: {} points", curve.rc.len());
    }
    Ok(())
}

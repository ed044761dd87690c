//! `cslbound synth`: deterministic synthetic data — single spectra,
//! thermal tables, or a complete pipeline-ready dataset directory with an
//! injected non-thermal floor.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cslbound::constants::BOLTZMANN;
use cslbound::io;
use cslbound::mass;
use cslbound::spectral::SpectralModelParams;
use cslbound::synth::{synth_spectrum, synth_thermal, SynthConfig, SynthMode};
use cslbound::thermal::SaturationModel;

use crate::dataset::{DatasetConfig, FitSpec, GridSpec, ResonatorSpec};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Subcommand)]
pub enum SynthCommand {
    /// One averaged spectrum with known ground truth.
    Spectrum(SpectrumArgs),
    /// A B-vs-T/Q table drawn around a saturation model.
    Thermal(ThermalArgs),
    /// A full dataset directory: geometry, per-temperature spectra,
    /// dataset.json — ready for `pipeline`.
    Dataset(DatasetArgs),
}

pub fn run(cmd: SynthCommand) -> Result<(), CliError> {
    match cmd {
        SynthCommand::Spectrum(args) => run_spectrum(args),
        SynthCommand::Thermal(args) => run_thermal(args),
        SynthCommand::Dataset(args) => run_dataset(args),
    }
}

// ---------------------------------------------------------------------------
// synth spectrum
// ---------------------------------------------------------------------------

#[derive(Parser)]
pub struct SpectrumArgs {
    /// Ground-truth model parameters (JSON: a, b, c, f0, f1, qprime).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n_av: Option<u32>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    n_samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// psd-scatter (default) or time-domain.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    band_lo: Option<f64>,
    #[arg(long)]
    band_hi: Option<f64>,
    /// Temperature recorded in the metadata sidecar (K).
    #[arg(long)]
    temperature: Option<f64>,
    /// Intrinsic Q recorded in the metadata sidecar.
    #[arg(long)]
    q: Option<f64>,
    /// Output spectrum table; sidecar goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct SpectrumFileConfig {
    params: Option<PathBuf>,
    n_av: Option<u32>,
    sample_rate: Option<f64>,
    n_samples: Option<u64>,
    seed: Option<u64>,
    mode: Option<String>,
    band_lo: Option<f64>,
    band_hi: Option<f64>,
    temperature: Option<f64>,
    q: Option<f64>,
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SynthMode, CliError> {
    match s {
        "psd-scatter" => Ok(SynthMode::PsdScatter),
        "time-domain" => Ok(SynthMode::TimeDomain),
        other => Err(CliError::Input(format!(
            "unknown synthesis mode '{other}' (psd-scatter | time-domain)"
        ))),
    }
}

pub fn meta_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn run_spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let file: SpectrumFileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => SpectrumFileConfig::default(),
    };
    let params_path = pick_req(args.params, file.params, "params")?;
    let truth: SpectralModelParams = io::read_json(&params_path)?;
    let out = pick_req(args.out, file.out, "out")?;
    let mode = parse_mode(&pick(args.mode, file.mode, "psd-scatter".into()))?;
    let cfg = SynthConfig {
        params: truth,
        n_av: pick(args.n_av, file.n_av, 60),
        sample_rate: pick(args.sample_rate, file.sample_rate, 100e3),
        n_samples: pick(args.n_samples, file.n_samples, 1 << 22),
        seed: pick(args.seed, file.seed, 0),
        mode,
        band: (
            pick(args.band_lo, file.band_lo, truth.f0 - 17.5),
            pick(args.band_hi, file.band_hi, truth.f0 + 17.5),
        ),
    };
    let temperature = pick(args.temperature, file.temperature, 0.1);
    let q = pick(args.q, file.q, 2.5e6);

    let mut builder = ManifestBuilder::new("synth-spectrum", &cfg);
    builder.record_input(&params_path)?;
    let spectrum = synth_spectrum(&cfg);
    let meta = meta_path_for(&out);
    io::write_spectrum(&out, &meta, &spectrum, temperature, truth.qprime, q)?;
    builder.record_output(&out);
    builder.record_output(&meta);
    builder.finish(&super::csl_noise::manifest_path(&out))?;
    println!("{} bins written to {}", spectrum.freqs.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth thermal
// ---------------------------------------------------------------------------

#[derive(Parser)]
pub struct ThermalArgs {
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
    #[arg(long)]
    ba: Option<f64>,
    #[arg(long)]
    bb: Option<f64>,
    #[arg(long)]
    x_co: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Relative scatter of B around the model.
    #[arg(long)]
    rel_noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct ThermalFileConfig {
    b0: Option<f64>,
    ba: Option<f64>,
    bb: Option<f64>,
    x_co: Option<f64>,
    exponent: Option<f64>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    points: Option<usize>,
    rel_noise: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn run_thermal(args: ThermalArgs) -> Result<(), CliError> {
    let file: ThermalFileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => ThermalFileConfig::default(),
    };
    let truth = SaturationModel {
        b0: pick(args.b0, file.b0, 0.0),
        ba: pick(args.ba, file.ba, 1.0e-12),
        bb: pick(args.bb, file.bb, 2.3e-12),
        x_co: pick(args.x_co, file.x_co, 5.3e-8),
        n: pick(args.exponent, file.exponent, 4.0),
    };
    let x_min = pick(args.x_min, file.x_min, 1e-8);
    let x_max = pick(args.x_max, file.x_max, 5e-7);
    let points = pick(args.points, file.points, 14);
    let rel_noise = pick(args.rel_noise, file.rel_noise, 0.02);
    let seed = pick(args.seed, file.seed, 0);
    let out = pick_req(args.out, file.out, "out")?;
    if points < 2 || !(x_max > x_min) || !(x_min > 0.0) {
        return Err(CliError::Input("need 0 < x-min < x-max, >= 2 points".into()));
    }
    let step = (x_max / x_min).ln() / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| x_min * (step * i as f64).exp()).collect();
    let dataset = synth_thermal(&truth, &grid, rel_noise, seed);

    let mut builder = ManifestBuilder::new("synth-thermal", &truth);
    io::write_thermal(&out, &dataset)?;
    builder.record_output(&out);
    builder.finish(&super::csl_noise::manifest_path(&out))?;
    println!("{} points written to {}", dataset.points.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth dataset
// ---------------------------------------------------------------------------

#[derive(Parser)]
pub struct DatasetArgs {
    /// Dataset directory to create.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Injected non-thermal force PSD (N^2/Hz); 0 = pure thermal.
    #[arg(long)]
    s_inj: Option<f64>,
    /// Comma-separated bath temperatures (K).
    #[arg(long)]
    temperatures: Option<String>,
    #[arg(long)]
    n_av: Option<u32>,
    #[arg(long)]
    n_samples: Option<u64>,
    /// Crossover temperature of the saturating bath (K).
    #[arg(long)]
    t_co: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct DatasetFileConfig {
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    s_inj: Option<f64>,
    temperatures: Option<String>,
    n_av: Option<u32>,
    n_samples: Option<u64>,
    t_co: Option<f64>,
}

/// Intrinsic Q vs temperature: surface losses rise with T and plateau,
/// mirroring the measured behaviour.
fn q_of_t(t: f64) -> f64 {
    2.83e6 / (1.0 + 0.8 * (t.min(0.5) / 0.5))
}

pub fn run_dataset(args: DatasetArgs) -> Result<(), CliError> {
    let file: DatasetFileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => DatasetFileConfig::default(),
    };
    let out_dir = pick_req(args.out_dir, file.out_dir, "out-dir")?;
    let seed = pick(args.seed, file.seed, 0);
    let s_inj = pick(args.s_inj, file.s_inj, 0.0);
    let n_av = pick(args.n_av, file.n_av, 60);
    let n_samples = pick(args.n_samples, file.n_samples, 1 << 22);
    let t_co = pick(args.t_co, file.t_co, 0.085);
    let temps_spec = pick(
        args.temperatures,
        file.temperatures,
        "0.03,0.04,0.055,0.075,0.1,0.13,0.18,0.25,0.35,0.5,0.7,1.0".to_string(),
    );
    let temperatures: Vec<f64> = temps_spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Input(format!("bad temperature '{s}': {e}")))
        })
        .collect::<Result<_, _>>()?;

    let resonator = ResonatorSpec {
        stiffness: 0.43,
        stiffness_sigma: 0.01,
        f0: 3532.7,
        mass: 7.1e-10,
        phi_x: 2.38e7,
    };
    let truth_shape = SpectralModelParams {
        a: 2.0e-12,
        b: 0.0, // set per temperature
        c: 5.0e-13,
        f0: resonator.f0,
        f1: resonator.f0 + 0.22,
        qprime: 3.0e5,
    };

    std::fs::create_dir_all(out_dir.join("spectra"))?;
    let geometry_path = out_dir.join("geometry.json");
    io::write_atomic(&geometry_path, mass::example_geometry_json())?;

    #[derive(Serialize)]
    struct Effective {
        seed: u64,
        s_inj: f64,
        n_av: u32,
        n_samples: u64,
        t_co: f64,
        temperatures: Vec<f64>,
    }
    let mut builder = ManifestBuilder::new(
        "synth-dataset",
        &Effective {
            seed,
            s_inj,
            n_av,
            n_samples,
            t_co,
            temperatures: temperatures.clone(),
        },
    );
    builder.record_output(&geometry_path);

    // B(T) from the amplitude relation: the non-thermal floor plus the
    // fluctuation-dissipation term, with one bath saturating at t_co
    let phi2 = resonator.phi_x * resonator.phi_x;
    let omega0 = 2.0 * std::f64::consts::PI * resonator.f0;
    let b_floor = phi2 * s_inj / (resonator.stiffness * resonator.stiffness);
    let thermal_coeff = phi2 * 4.0 * BOLTZMANN / (resonator.stiffness * omega0);
    let sat_fraction = 0.3;

    for (idx, &t) in temperatures.iter().enumerate() {
        let q = q_of_t(t);
        let t_eff = sat_fraction * (t.powi(4) + t_co.powi(4)).powf(0.25) + (1.0 - sat_fraction) * t;
        let b = b_floor + thermal_coeff * t_eff / q;
        let params = SpectralModelParams { b, ..truth_shape };
        let cfg = SynthConfig {
            params,
            n_av,
            sample_rate: 100e3,
            n_samples,
            seed: seed.wrapping_add(1_000_003u64.wrapping_mul(idx as u64)),
            mode: SynthMode::PsdScatter,
            band: (resonator.f0 - 17.7, resonator.f0 + 17.7),
        };
        let spectrum = synth_spectrum(&cfg);
        let name = format!("spec_{:04.0}mK.tsv", t * 1000.0);
        let path = out_dir.join("spectra").join(&name);
        let meta = meta_path_for(&path);
        io::write_spectrum(&path, &meta, &spectrum, t, truth_shape.qprime, q)?;
        builder.record_output(&path);
        builder.record_output(&meta);
    }

    let dataset = DatasetConfig {
        geometry: "geometry.json".into(),
        spectra_dir: "spectra".into(),
        resonator,
        fit: FitSpec {
            qprime: truth_shape.qprime,
            f1_init: Some(truth_shape.f1),
            f1_prior_sigma: None,
            window_halfwidth: Some(17.5),
        },
        t_restrict: Some(0.1),
        x_error_frac: Some(0.01),
        cl: Some(0.95),
        rc_grid: Some(GridSpec {
            min: 1e-8,
            max: 1e-5,
            points: 13,
        }),
    };
    let dataset_path = out_dir.join("dataset.json");
    io::write_json(&dataset_path, &dataset)?;
    builder.record_output(&dataset_path);
    builder.finish(&out_dir.join("manifest.json"))?;
    println!(
        "dataset with {} spectra written to {}",
        temperatures.len(),
        out_dir.display()
    );
    Ok(())
}

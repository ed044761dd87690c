//! `cslbound csl-noise`: PSD scan of a geometry over correlation lengths.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::csl::{csl_psd_derivative_scan, QuadConfig};
use cslbound::exclusion::log_grid;
use cslbound::io;
use cslbound::mass::CompositeMass;

use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    /// Geometry description (JSON).
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Single correlation length (m); alternative to the grid flags.
    #[arg(long)]
    rc: Option<f64>,
    #[arg(long)]
    rc_min: Option<f64>,
    #[arg(long)]
    rc_max: Option<f64>,
    #[arg(long)]
    rc_points: Option<usize>,
    /// Collapse rate multiplying the unit-rate PSD column.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    max_evals: Option<u64>,
    /// Output scan table (TSV); the manifest lands next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with the same fields as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    geometry: Option<PathBuf>,
    rc: Option<f64>,
    rc_min: Option<f64>,
    rc_max: Option<f64>,
    rc_points: Option<usize>,
    lambda: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_evals: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Effective {
    geometry: String,
    rc_grid: Vec<f64>,
    lambda: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_evals: u64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let geometry_path = pick_req(args.geometry, file.geometry, "geometry")?;
    let out = pick_req(args.out, file.out, "out")?;
    let lambda = pick(args.lambda, file.lambda, 1.0);
    let defaults = QuadConfig::default_3d();
    let cfg = QuadConfig {
        rel_tol: pick(args.rel_tol, file.rel_tol, defaults.rel_tol),
        abs_tol: pick(args.abs_tol, file.abs_tol, defaults.abs_tol),
        max_evals: pick(args.max_evals, file.max_evals, defaults.max_evals),
    };
    let grid = match (args.rc.or(file.rc), args.rc_min.or(file.rc_min)) {
        (Some(rc), None) => vec![rc],
        (None, Some(min)) => {
            let max = pick_req(args.rc_max, file.rc_max, "rc-max")?;
            let points = pick(args.rc_points, file.rc_points, 60);
            if points < 2 || !(max > min) || !(min > 0.0) {
                return Err(CliError::Input(
                    "rc grid needs rc-min < rc-max and at least 2 points".into(),
                ));
            }
            log_grid(min, max, points)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Input("give either --rc or an rc grid, not both".into()))
        }
        (None, None) => return Err(CliError::Input("give --rc or --rc-min/--rc-max".into())),
    };

    let text = std::fs::read_to_string(&geometry_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", geometry_path.display())))?;
    let mass = CompositeMass::from_json(&text)?;

    let effective = Effective {
        geometry: geometry_path.display().to_string(),
        rc_grid: grid.clone(),
        lambda,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        max_evals: cfg.max_evals,
    };
    let mut builder = ManifestBuilder::new("csl-noise", &effective);
    builder.record_input(&geometry_path)?;

    let scan = csl_psd_derivative_scan(&mass, &grid, &cfg)?;
    let scaled: Vec<(f64, f64)> = scan.iter().map(|&(rc, s)| (rc, lambda * s)).collect();
    io::write_atomic(&out, &io::scan_to_tsv(&scaled))?;
    builder.record_output(&out);
    builder.finish(&manifest_path(&out))?;
    for (rc, s) in &scaled {
        println!("{}\t{}", io::fmt_sci(*rc), io::fmt_sci(*s));
    }
    Ok(())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

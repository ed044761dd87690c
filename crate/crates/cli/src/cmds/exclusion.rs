//! `cslbound exclusion`: convert a force-noise upper limit into an
//! exclusion curve for the given geometry.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::csl::QuadConfig;
use cslbound::exclusion::{exclusion_curve, log_grid};
use cslbound::io;
use cslbound::mass::CompositeMass;

use crate::error::CliError;
use crate::manifest::{hash_file, ManifestBuilder};
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Force-noise upper limit (N^2/Hz).
    #[arg(long)]
    s_upper: Option<f64>,
    #[arg(long)]
    cl: Option<f64>,
    #[arg(long)]
    rc_min: Option<f64>,
    #[arg(long)]
    rc_max: Option<f64>,
    #[arg(long)]
    rc_points: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    geometry: Option<PathBuf>,
    s_upper: Option<f64>,
    cl: Option<f64>,
    rc_min: Option<f64>,
    rc_max: Option<f64>,
    rc_points: Option<usize>,
    rel_tol: Option<f64>,
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let geometry_path = pick_req(args.geometry, file.geometry, "geometry")?;
    let s_upper = pick_req(args.s_upper, file.s_upper, "s-upper")?;
    let out = pick_req(args.out, file.out, "out")?;
    let cl = pick(args.cl, file.cl, 0.95);
    let rc_min = pick(args.rc_min, file.rc_min, 1e-9);
    let rc_max = pick(args.rc_max, file.rc_max, 1e-4);
    let rc_points = pick(args.rc_points, file.rc_points, 60);
    if rc_points < 2 || !(rc_max > rc_min) || !(rc_min > 0.0) {
        return Err(CliError::Input(
            "rc grid needs 0 < rc-min < rc-max and at least 2 points".into(),
        ));
    }
    let mut cfg = QuadConfig::default_3d();
    if let Some(r) = args.rel_tol.or(file.rel_tol) {
        cfg.rel_tol = r;
    }

    let text = std::fs::read_to_string(&geometry_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", geometry_path.display())))?;
    let mass = CompositeMass::from_json(&text)?;
    let geometry_hash = hash_file(&geometry_path)?;

    #[derive(Serialize)]
    struct Effective {
        geometry_sha256: String,
        s_upper: f64,
        cl: f64,
        rc_min: f64,
        rc_max: f64,
        rc_points: usize,
        rel_tol: f64,
    }
    let effective = Effective {
        geometry_sha256: geometry_hash.sha256.clone(),
        s_upper,
        cl,
        rc_min,
        rc_max,
        rc_points,
        rel_tol: cfg.rel_tol,
    };
    let mut builder = ManifestBuilder::new("exclusion", &effective);
    builder.record_input(&geometry_path)?;

    let grid = log_grid(rc_min, rc_max, rc_points);
    let curve = exclusion_curve(&mass, s_upper, &grid, cl, &cfg, &geometry_hash.sha256)?;
    io::write_atomic(&out, &io::curve_to_tsv(&curve))?;
    builder.record_output(&out);
    builder.finish(&super::csl_noise::manifest_path(&out))?;
    println!(
        "{} points written; lambda_upper({} m) = {} 1/s",
        curve.rc.len(),
        io::fmt_sci(curve.rc[curve.rc.len() / 2]),
        io::fmt_sci(curve.lambda_upper[curve.rc.len() / 2])
    );
    Ok(())
}

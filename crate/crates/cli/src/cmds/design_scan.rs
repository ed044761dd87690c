//! `cslbound design-scan`: testable collapse rate per layer count for a
//! candidate multilayer, plus the optimal layer thickness.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

use cslbound::csl::QuadConfig;
use cslbound::exclusion::{design_scan, optimal_thickness};
use cslbound::io;
use cslbound::mass::MultilayerStack;

use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::{pick, pick_req};

#[derive(Parser)]
pub struct Args {
    #[arg(long)]
    rho1: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Layer thickness (m).
    #[arg(long)]
    d: Option<f64>,
    /// Comma-separated layer-pair counts, e.g. "1,3,9,23".
    #[arg(long)]
    n_lay: Option<String>,
    /// Achievable force-noise floor (N^2/Hz).
    #[arg(long)]
    s_target: Option<f64>,
    /// Correlation length the design targets (m).
    #[arg(long)]
    rc: Option<f64>,
    /// Also search the optimal thickness in [d-min, d-max].
    #[arg(long)]
    optimize_thickness: bool,
    #[arg(long)]
    d_min: Option<f64>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    rho1: Option<f64>,
    rho2: Option<f64>,
    l1: Option<f64>,
    l2: Option<f64>,
    d: Option<f64>,
    n_lay: Option<String>,
    s_target: Option<f64>,
    rc: Option<f64>,
    d_min: Option<f64>,
    d_max: Option<f64>,
    out: Option<PathBuf>,
}

pub const DESIGN_HEADER: &str = "n_lay\ttestable_lambda_per_s";

pub fn run(args: Args) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(p) => io::read_json(p)?,
        None => FileConfig::default(),
    };
    let rho1 = pick(args.rho1, file.rho1, 7.17e3);
    let rho2 = pick(args.rho2, file.rho2, 2.2e3);
    let l1 = pick(args.l1, file.l1, 100e-6);
    let l2 = pick(args.l2, file.l2, 100e-6);
    let d = pick(args.d, file.d, 320e-9);
    let rc = pick(args.rc, file.rc, 1e-7);
    let s_target = pick_req(args.s_target, file.s_target, "s-target")?;
    let out = pick_req(args.out, file.out, "out")?;
    let n_lay_spec = pick(args.n_lay, file.n_lay, "1,2,3,4,5,6,7,8,9,10,12,16,23".to_string());
    let n_lay: Vec<u32> = n_lay_spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Input(format!("bad n-lay entry '{s}': {e}")))
        })
        .collect::<Result<_, _>>()?;

    let template = MultilayerStack::new(rho1, rho2, 1, d, l1, l2, [0.0; 3], [0.0, 0.0, 1.0])?;
    let cfg = QuadConfig::default_1d();

    #[derive(Serialize)]
    struct Effective {
        rho1: f64,
        rho2: f64,
        l1: f64,
        l2: f64,
        d: f64,
        rc: f64,
        s_target: f64,
        n_lay: Vec<u32>,
    }
    let builder = ManifestBuilder::new(
        "design-scan",
        &Effective {
            rho1,
            rho2,
            l1,
            l2,
            d,
            rc,
            s_target,
            n_lay: n_lay.clone(),
        },
    );
    let mut builder = builder;

    let scan = design_scan(&template, &n_lay, s_target, rc, &cfg)?;
    let mut text = String::from(DESIGN_HEADER);
    text.push('\n');
    for (n, lam) in &scan {
        text.push_str(&format!("{n}\t{}\n", io::fmt_sci(*lam)));
        println!("n_lay = {n:3}: testable lambda = {} 1/s", io::fmt_sci(*lam));
    }
    io::write_atomic(&out, &text)?;
    builder.record_output(&out);

    if args.optimize_thickness {
        let d_min = pick(args.d_min, file.d_min, 0.5 * rc);
        let d_max = pick(args.d_max, file.d_max, 8.0 * rc);
        let d_star = optimal_thickness(&template, rc, (d_min, d_max), &cfg)?;
        println!(
            "optimal thickness at rc = {}: d* = {} m",
            io::fmt_sci(rc),
            io::fmt_sci(d_star)
        );
    }
    builder.finish(&super::csl_noise::manifest_path(&out))?;
    Ok(())
}

//! Dataset-directory layout shared by `synth dataset` and `pipeline`.

use serde::{Deserialize, Serialize};

/// Mechanical-mode calibration, including the stiffness uncertainty that
/// propagates into the non-thermal noise error bar.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub stiffness: f64,
    #[serde(default)]
    pub stiffness_sigma: f64,
    pub f0: f64,
    pub mass: f64,
    pub phi_x: f64,
}

impl ResonatorSpec {
    pub fn params(&self) -> cslbound::thermal::ResonatorParams {
        cslbound::thermal::ResonatorParams {
            stiffness: self.stiffness,
            f0: self.f0,
            mass: self.mass,
            phi_x: self.phi_x,
        }
    }
}

/// Per-spectrum fit settings. `f1_init` is the reference antiresonance;
/// without it the fit anchors f1 near the cold-start guess and the
/// amplitude B inherits a constant offset (see the spectral module notes).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitSpec {
    pub qprime: f64,
    #[serde(default)]
    pub f1_init: Option<f64>,
    #[serde(default)]
    pub f1_prior_sigma: Option<f64>,
    /// Fit window half-width around the resonance guess (Hz).
    #[serde(default)]
    pub window_halfwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// `dataset.json` at the root of a dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Geometry file, relative to the dataset directory.
    pub geometry: String,
    /// Directory of spectrum tables (`*.tsv` + `*.meta.json`), relative.
    pub spectra_dir: String,
    pub resonator: ResonatorSpec,
    pub fit: FitSpec,
    /// Keep only T >= this (K) for the linear fit; default 0.1.
    #[serde(default)]
    pub t_restrict: Option<f64>,
    /// Fractional x = T/Q error for the orthogonal fit; default 0.01.
    #[serde(default)]
    pub x_error_frac: Option<f64>,
    /// Confidence level of the upper limit; default 0.95.
    #[serde(default)]
    pub cl: Option<f64>,
    #[serde(default)]
    pub rc_grid: Option<GridSpec>,
}

//! Exclusion curves on the collapse parameters and multilayer design scans.
//!
//! With a force-noise upper limit `S_upper` in hand, every correlation
//! length excludes collapse rates above
//! `lambda_upper(rc) = S_upper / S_F(lambda = 1, rc)` for the actual
//! composite geometry.

use serde::{Deserialize, Serialize};

use crate::csl::{self, CslError, CslParams, QuadConfig};
use crate::mass::{CompositeMass, MultilayerStack};
use crate::numerics::golden;
use crate::parallel;

/// Upper bound on the collapse rate per correlation length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCurve {
    /// Correlation lengths (m), strictly increasing.
    pub rc: Vec<f64>,
    /// Excluded-above collapse rates (1/s).
    pub lambda_upper: Vec<f64>,
    /// Confidence level of the underlying force-noise limit.
    pub cl: f64,
    /// Free-form geometry label for run manifests.
    pub geometry_tag: String,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ExclusionError {
    #[error(transparent)]
    Csl(#[from] CslError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no interior optimum for the layer thickness in [{lo:.3e}, {hi:.3e}] m")]
    NoInteriorMaximum { lo: f64, hi: f64 },
}

/// Default logarithmic grid spanning the published exclusion-plot range.
pub fn default_rc_grid() -> Vec<f64> {
    log_grid(1e-9, 1e-4, 60)
}

/// `n` logarithmically spaced points over `[lo, hi]` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Exclusion curve for a composite geometry: one converged PSD per grid
/// point (parallel across the grid), then the linear-in-lambda inversion.
pub fn exclusion_curve(
    mass: &CompositeMass,
    s_upper: f64,
    rc_grid: &[f64],
    cl: f64,
    cfg: &QuadConfig,
    geometry_tag: &str,
) -> Result<ExclusionCurve, ExclusionError> {
    if !(s_upper > 0.0) {
        return Err(ExclusionError::InvalidParameter(format!(
            "force-noise upper limit must be positive, got {s_upper}"
        )));
    }
    let scan = csl::csl_psd_derivative_scan(mass, rc_grid, cfg)?;
    Ok(ExclusionCurve {
        rc: scan.iter().map(|&(rc, _)| rc).collect(),
        lambda_upper: scan.iter().map(|&(_, psd)| s_upper / psd).collect(),
        cl,
        geometry_tag: geometry_tag.to_string(),
    })
}

/// Smallest testable collapse rate per layer count: for each `n_lay` the
/// stack of `template` materials and base is evaluated at `rc` and the
/// target force noise converts to `lambda = s_target / S(lambda=1)`.
pub fn design_scan(
    template: &MultilayerStack,
    n_lay_list: &[u32],
    s_target: f64,
    rc: f64,
    cfg_1d: &QuadConfig,
) -> Result<Vec<(u32, f64)>, ExclusionError> {
    if !(s_target > 0.0) {
        return Err(ExclusionError::InvalidParameter(format!(
            "target force noise must be positive, got {s_target}"
        )));
    }
    let params = CslParams::new(1.0, rc)?;
    let results = parallel::map_ordered(n_lay_list, |&n_lay| {
        let stack = MultilayerStack {
            n_lay,
            ..*template
        };
        csl::csl_psd_multilayer(&stack, &params, cfg_1d).map(|s| (n_lay, s_target / s))
    });
    results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(ExclusionError::from)
}

/// Layer thickness that maximizes the collapse noise at `rc` for a fixed
/// total-thickness budget (golden-section search to 1 nm).
///
/// At fixed layer count the PSD grows monotonically with `d` — more
/// material is always louder — so the meaningful optimum is the
/// per-unit-thickness noise density: thinner layers buy more interfaces
/// per deposited metre, thicker layers decohere less. The density is
/// evaluated in the thick-stack limit, where it no longer depends on the
/// layer count; the optimum sits near `d = 3.1 rc` and scales linearly
/// with `rc`.
pub fn optimal_thickness(
    template: &MultilayerStack,
    rc: f64,
    d_bounds: (f64, f64),
    cfg_1d: &QuadConfig,
) -> Result<f64, ExclusionError> {
    let (lo, hi) = d_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(ExclusionError::InvalidParameter(format!(
            "thickness bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let params = CslParams::new(1.0, rc)?;
    const THICK_STACK_PAIRS: u32 = 100;
    let density = |d: f64| -> f64 {
        let stack = MultilayerStack {
            n_lay: THICK_STACK_PAIRS,
            thickness: d,
            ..*template
        };
        match csl::csl_psd_multilayer(&stack, &params, cfg_1d) {
            Ok(s) => s / d,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (d_star, _) = golden::maximize(density, lo, hi, 1e-9)
        .map_err(|_| ExclusionError::NoInteriorMaximum { lo, hi })?;
    Ok(d_star)
}

/// Indicative band of collapse parameters where the collapse mechanism
/// would already be effective at mesoscopic scales: anchored at
/// `lambda = 4.4e-10 1/s` at `rc = 1e-7 m`, rising two decades per decade
/// of `rc` (the 1e9+-2 / 1e11+-2 enhancement anchors over the
/// conservative baseline), four decades tall, spanning rc in
/// [3e-8, 3e-6] m. The vertices are approximate by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdlerRegion {
    /// Anchor point (m, 1/s) on the lower edge.
    pub rc_anchor: f64,
    pub lambda_anchor: f64,
    /// Band height in decades.
    pub decades: f64,
    /// Covered correlation lengths (m).
    pub rc_range: (f64, f64),
}

impl Default for AdlerRegion {
    fn default() -> Self {
        Self {
            rc_anchor: 1e-7,
            lambda_anchor: 4.4e-10,
            decades: 4.0,
            rc_range: (3e-8, 3e-6),
        }
    }
}

impl AdlerRegion {
    /// Lower edge of the band at `rc` (log-log slope 2).
    pub fn lower_edge(&self, rc: f64) -> f64 {
        self.lambda_anchor * (rc / self.rc_anchor).powi(2)
    }

    /// Upper edge of the band at `rc`.
    pub fn upper_edge(&self, rc: f64) -> f64 {
        self.lower_edge(rc) * 10f64.powf(self.decades)
    }

    pub fn contains(&self, rc: f64, lambda: f64) -> bool {
        rc >= self.rc_range.0
            && rc <= self.rc_range.1
            && lambda >= self.lower_edge(rc)
            && lambda <= self.upper_edge(rc)
    }

    /// Grid points of a curve that cut below the band's lower edge
    /// (i.e. exclude part of the band at that rc).
    pub fn excluded_points(&self, curve: &ExclusionCurve) -> Vec<(f64, f64)> {
        curve
            .rc
            .iter()
            .zip(&curve.lambda_upper)
            .filter(|(&rc, &lam)| {
                rc >= self.rc_range.0 && rc <= self.rc_range.1 && lam < self.lower_edge(rc)
            })
            .map(|(&rc, &lam)| (rc, lam))
            .collect()
    }
}

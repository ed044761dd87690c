//! Synthetic spectra and thermal datasets with known ground truth.
//!
//! All randomness comes from ChaCha12 (a counter-based stream cipher RNG)
//! seeded through `rand_core`'s 64-bit seed expansion, with samplers built
//! on `libm` only — output is therefore byte-identical for a fixed seed,
//! across runs and platforms. Periodogram `p` of a time-domain run uses
//! the stream seeded with `seed ^ p`, so generation parallelizes without
//! changing the result.
//!
//! Two spectrum modes:
//!
//! * `PsdScatter` — each bin drawn as `model(f) * chi2(2 n_av) / (2 n_av)`,
//!   the exact distribution of an n_av-fold average of periodogram bins;
//!   no leakage, fast, the workhorse for fit-pipeline validation.
//! * `TimeDomain` — synthesizes the flux time series (white floor plus
//!   Lorentzian and antiresonance paths through discrete-time filters),
//!   applies Blackman windows and averages n_av periodograms, leakage
//!   included.

use rand_core::{RngCore, SeedableRng};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::spectral::{model_psd, NoiseSpectrum, SpectralModelParams, WindowKind};
use crate::thermal::{SaturationModel, ThermalDataset, ThermalPoint};

/// Deterministic random stream: ChaCha12 with libm-based samplers.
pub struct SynthRng {
    inner: rand_chacha::ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: rand_chacha::ChaCha12Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform in [0, 1), 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u1 = self.uniform();
            if u1 <= 0.0 {
                continue;
            }
            let u2 = self.uniform();
            let r = libm::sqrt(-2.0 * libm::log(u1));
            let theta = 2.0 * std::f64::consts::PI * u2;
            self.spare_normal = Some(r * libm::sin(theta));
            return r * libm::cos(theta);
        }
    }

    /// Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang).
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape >= 1.0, "gamma sampler requires shape >= 1");
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / libm::sqrt(9.0 * d);
        loop {
            let x = self.normal();
            let v = (1.0 + c * x).powi(3);
            if v <= 0.0 {
                continue;
            }
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v;
            }
            if u > 0.0 && libm::log(u) < 0.5 * x * x + d * (1.0 - v + libm::log(v)) {
                return d * v;
            }
        }
    }
}

/// How the spectrum is synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    PsdScatter,
    TimeDomain,
}

/// Ground truth and acquisition settings for a synthetic spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub params: SpectralModelParams,
    pub n_av: u32,
    pub sample_rate: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub mode: SynthMode,
    /// Emitted frequency band (Hz); bins outside are dropped.
    pub band: (f64, f64),
}

impl SynthConfig {
    /// Acquisition settings mirroring the experiment: 100 kHz, 2^22
    /// samples, 60 averages, band [3515, 3550] Hz.
    pub fn paper_like(params: SpectralModelParams, seed: u64) -> Self {
        Self {
            params,
            n_av: 60,
            sample_rate: 100e3,
            n_samples: 1 << 22,
            seed,
            mode: SynthMode::PsdScatter,
            band: (3515.0, 3550.0),
        }
    }
}

/// Generate one averaged spectrum.
pub fn synth_spectrum(cfg: &SynthConfig) -> NoiseSpectrum {
    match cfg.mode {
        SynthMode::PsdScatter => synth_psd_scatter(cfg),
        SynthMode::TimeDomain => synth_time_domain(cfg),
    }
}

fn band_bins(cfg: &SynthConfig) -> (u64, u64, f64) {
    let df = cfg.sample_rate / cfg.n_samples as f64;
    let k0 = (cfg.band.0 / df).ceil() as u64;
    let k1 = (cfg.band.1 / df).floor() as u64;
    (k0, k1, df)
}

fn synth_psd_scatter(cfg: &SynthConfig) -> NoiseSpectrum {
    let (k0, k1, df) = band_bins(cfg);
    let mut rng = SynthRng::new(cfg.seed);
    let nav = cfg.n_av as f64;
    let mut freqs = Vec::with_capacity((k1 - k0 + 1) as usize);
    let mut psd = Vec::with_capacity(freqs.capacity());
    for k in k0..=k1 {
        let f = k as f64 * df;
        freqs.push(f);
        // chi2(2 n_av) / (2 n_av) == Gamma(n_av, 1) / n_av
        psd.push(model_psd(f, &cfg.params) * rng.gamma(nav) / nav);
    }
    NoiseSpectrum {
        freqs,
        psd,
        n_av: cfg.n_av,
        window: WindowKind::Blackman,
        sample_rate: cfg.sample_rate,
        n_samples: cfg.n_samples,
    }
}

/// Two-pole IIR section with stationary-state initialization.
struct Biquad {
    // y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] + a1 y[n-1] + a2 y[n-2]
    b: [f64; 3],
    a: [f64; 2],
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.b[1] * self.x1 + self.b[2] * self.x2
            + self.a[0] * self.y1
            + self.a[1] * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Impulse-invariant discretization of 1/(s^2 + g s + w0^2), gain
    /// scaled so that driving with unit-variance white noise yields the
    /// one-sided output PSD `amp / ((f^2-f0^2)^2 + (f f0/Q')^2)` near the
    /// resonance. The AR(2) state starts in its stationary distribution,
    /// so no ring-up transient pollutes the spectra (decay times at high
    /// Q' exceed whole periodograms).
    fn resonator(f0: f64, qprime: f64, amp: f64, dt: f64, rng: &mut SynthRng) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * f0;
        let g = w0 / qprime;
        let wd = (w0 * w0 - 0.25 * g * g).sqrt();
        let decay = (-0.5 * g * dt).exp();
        let a1 = 2.0 * decay * (wd * dt).cos();
        let a2 = -decay * decay;
        // impulse invariance: h[n] = dt * e^{-g n dt / 2} sin(wd n dt) / wd
        let b1 = dt * decay * (wd * dt).sin() / wd;
        // white force with one-sided PSD S_w filtered by |G|^2 = 1/(16 pi^4 D)
        // has output PSD S_w / (16 pi^4 D); we want amp / D
        let sw = 16.0 * std::f64::consts::PI.powi(4) * amp;
        let sigma_x = (sw * 0.5 / dt).sqrt();
        let mut bq = Self {
            b: [0.0, b1 * sigma_x, 0.0],
            a: [a1, a2],
            x1: rng.normal(),
            x2: rng.normal(),
            y1: 0.0,
            y2: 0.0,
        };
        // stationary AR(2) covariance: c1 = a1 c0 / (1 - a2),
        // c0 (1 - a1^2 - a2^2 - 2 a1^2 a2 / (1 - a2)) = b^2
        let beff = b1 * sigma_x;
        let denom = 1.0 - a1 * a1 - a2 * a2 - 2.0 * a1 * a1 * a2 / (1.0 - a2);
        if denom > 0.0 {
            let c0 = beff * beff / denom;
            let c1 = a1 * c0 / (1.0 - a2);
            // Cholesky of [[c0, c1], [c1, c0]]
            let l11 = c0.sqrt();
            let l21 = c1 / l11;
            let l22 = (c0 - l21 * l21).max(0.0).sqrt();
            let (z1, z2) = (rng.normal(), rng.normal());
            bq.y1 = l11 * z1;
            bq.y2 = l21 * z1 + l22 * z2;
        }
        bq
    }

    /// Matched-Z antiresonance section: zeros on the unit circle at f1,
    /// poles of the resonator, broadband gain `amp` far from resonance
    /// (output PSD `amp (f^2-f1^2)^2 / ((f^2-f0^2)^2 + (f f0/Q')^2)`).
    fn antiresonator(f0: f64, f1: f64, qprime: f64, amp: f64, dt: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * f0;
        let g = w0 / qprime;
        let wd = (w0 * w0 - 0.25 * g * g).sqrt();
        let decay = (-0.5 * g * dt).exp();
        let a1 = 2.0 * decay * (wd * dt).cos();
        let a2 = -decay * decay;
        let w1 = 2.0 * std::f64::consts::PI * f1;
        let bz1 = -2.0 * (w1 * dt).cos();
        let sigma_x = (amp * 0.5 / dt).sqrt();
        // far from the resonance both quads tend to (1 - z^-1 e^{i w dt})
        // products; matching there fixes unit broadband gain
        Self {
            b: [sigma_x, bz1 * sigma_x, sigma_x],
            a: [a1, a2],
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }
}

fn blackman_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect()
}

fn synth_time_domain(cfg: &SynthConfig) -> NoiseSpectrum {
    let n = cfg.n_samples as usize;
    let dt = 1.0 / cfg.sample_rate;
    let (k0, k1, df) = band_bins(cfg);
    let window = blackman_window(n);
    let wsum2: f64 = window.iter().map(|w| w * w).sum();
    let p = cfg.params;
    let sigma_a = (p.a * 0.5 / dt).sqrt();

    let mut fft_planner = FftPlanner::new();
    let fft = fft_planner.plan_fft_forward(n);

    let mut avg = vec![0.0f64; (k1 - k0 + 1) as usize];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for pg in 0..cfg.n_av {
        let mut rng = SynthRng::new(cfg.seed ^ pg as u64);
        let mut res = Biquad::resonator(p.f0, p.qprime, p.b * p.f0.powi(4), dt, &mut rng);
        let mut anti = Biquad::antiresonator(p.f0, p.f1, p.qprime, p.c, dt);
        for (i, b) in buf.iter_mut().enumerate() {
            let flux = sigma_a * rng.normal()
                + res.process(rng.normal())
                + anti.process(rng.normal());
            *b = Complex64::new(flux * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (j, k) in (k0..=k1).enumerate() {
            let mag2 = buf[k as usize].norm_sqr();
            // one-sided PSD of the windowed periodogram
            avg[j] += 2.0 * mag2 * dt / wsum2;
        }
    }
    for v in &mut avg {
        *v /= cfg.n_av as f64;
    }
    NoiseSpectrum {
        freqs: (k0..=k1).map(|k| k as f64 * df).collect(),
        psd: avg,
        n_av: cfg.n_av,
        window: WindowKind::Blackman,
        sample_rate: cfg.sample_rate,
        n_samples: cfg.n_samples,
    }
}

/// Synthetic B-vs-x dataset drawn around a saturation model with relative
/// scatter `rel_noise`; the (T, Q) split is carried with a fixed Q.
pub fn synth_thermal(
    truth: &SaturationModel,
    x_grid: &[f64],
    rel_noise: f64,
    seed: u64,
) -> ThermalDataset {
    let mut rng = SynthRng::new(seed);
    let q = 1.0e6;
    let points = x_grid
        .iter()
        .map(|&x| {
            let b_true = truth.eval(x);
            let sigma = rel_noise * b_true.abs();
            let b = if sigma > 0.0 {
                b_true + sigma * rng.normal()
            } else {
                b_true
            };
            ThermalPoint {
                t: x * q,
                q,
                b,
                sigma_b: if sigma > 0.0 { sigma } else { b_true.abs() * 1e-12 },
            }
        })
        .collect();
    ThermalDataset { points }
}

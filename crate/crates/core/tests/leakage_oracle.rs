//! Numerical oracle for the leakage mask: the Blackman window's power
//! spectrum, computed by zero-padded FFT, crosses -85 dB of its peak just
//! inside the first null at 3 bins; masking everything within that
//! threshold therefore equals masking within the 3-bin half width, and at
//! the experiment's resolution that is 6 points.

use cslbound::spectral::{leakage_mask, NoiseSpectrum, WindowKind};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// First offset (in bins of the unpadded window) where the window power
/// spectrum drops below `threshold_db` of its maximum.
fn blackman_crossing_bins(n: usize, pad: usize, threshold_db: f64) -> f64 {
    let total = n * pad;
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for (i, b) in buf.iter_mut().take(n).enumerate() {
        let x = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let w = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
        *b = Complex64::new(w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(total).process(&mut buf);
    let peak = buf[0].norm_sqr();
    let cut = peak * 10f64.powf(threshold_db / 10.0);
    for (k, v) in buf.iter().enumerate().take(total / 2) {
        if v.norm_sqr() < cut {
            return k as f64 / pad as f64;
        }
    }
    panic!("no crossing found");
}

fn paper_grid() -> NoiseSpectrum {
    let sample_rate = 100e3;
    let n_samples = 1u64 << 22;
    let df = sample_rate / n_samples as f64;
    let k0 = (3515.0 / df).ceil() as u64;
    let k1 = (3550.0 / df).floor() as u64;
    let freqs: Vec<f64> = (k0..=k1).map(|k| k as f64 * df).collect();
    let psd = vec![1e-12; freqs.len()];
    NoiseSpectrum {
        freqs,
        psd,
        n_av: 60,
        window: WindowKind::Blackman,
        sample_rate,
        n_samples,
    }
}

#[test]
fn window_power_crosses_85db_at_the_main_lobe_edge() {
    let nu85 = blackman_crossing_bins(4096, 64, -85.0);
    assert!(
        nu85 > 2.85 && nu85 <= 3.0,
        "-85 dB crossing at {nu85} bins, expected just inside 3"
    );
}

#[test]
fn threshold_mask_equals_three_bin_mask() {
    let spec = paper_grid();
    let df = spec.bin_width();
    let nu85 = blackman_crossing_bins(4096, 64, -85.0);
    for peak in [3532.7, 3520.11, 3540.0, 3533.0 + 0.37 * df] {
        let by_rule = leakage_mask(&spec, peak).unwrap();
        let by_threshold: Vec<usize> = spec
            .freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| (f - peak).abs() <= nu85 * df)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(
            by_rule.len(),
            by_threshold.len(),
            "peak {peak}: rule {} vs threshold {}",
            by_rule.len(),
            by_threshold.len()
        );
    }
}

#[test]
fn paper_resolution_masks_exactly_six_points() {
    let spec = paper_grid();
    let mask = leakage_mask(&spec, 3532.7).unwrap();
    assert_eq!(mask.len(), 6);
    // out of well over a thousand fitted points
    assert!(spec.freqs.len() > 1000);
}

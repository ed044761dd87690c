//! File formats shared between the library and the CLI.
//!
//! Numeric tables are tab-separated text with a fixed header line; every
//! floating-point field is written in scientific notation with nine
//! significant digits, locale-independent, so identical runs produce
//! byte-identical files. Structured records (fit results, metadata,
//! manifests) are JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exclusion::ExclusionCurve;
use crate::spectral::{NoiseSpectrum, WindowKind};
use crate::thermal::{ThermalDataset, ThermalPoint};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Scientific notation, nine significant digits.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(content.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// spectrum table + metadata sidecar
// ---------------------------------------------------------------------------

pub const SPECTRUM_HEADER: &str = "frequency_hz\tpsd_phi0sq_per_hz";

/// Sidecar record accompanying a spectrum table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub n_av: u32,
    pub window: WindowKind,
    pub sample_rate: f64,
    pub n_samples: u64,
    /// Bath temperature of this acquisition (K).
    pub temperature_k: f64,
    /// Apparent quality factor (feedback on), fixed in fits.
    pub qprime: f64,
    /// Intrinsic quality factor at this temperature.
    pub q: f64,
}

/// Serialize the PSD table of a spectrum.
pub fn spectrum_to_tsv(spectrum: &NoiseSpectrum) -> String {
    let mut out = String::with_capacity(32 * spectrum.freqs.len() + 64);
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for (f, p) in spectrum.freqs.iter().zip(&spectrum.psd) {
        out.push_str(&fmt_sci(*f));
        out.push('\t');
        out.push_str(&fmt_sci(*p));
        out.push('\n');
    }
    out
}

pub fn write_spectrum(
    path: &Path,
    meta_path: &Path,
    spectrum: &NoiseSpectrum,
    temperature_k: f64,
    qprime: f64,
    q: f64,
) -> Result<(), IoError> {
    write_atomic(path, &spectrum_to_tsv(spectrum))?;
    let meta = SpectrumMetadata {
        n_av: spectrum.n_av,
        window: spectrum.window,
        sample_rate: spectrum.sample_rate,
        n_samples: spectrum.n_samples,
        temperature_k,
        qprime,
        q,
    };
    write_json(meta_path, &meta)
}

/// Read a spectrum table plus its metadata sidecar.
pub fn read_spectrum(path: &Path, meta_path: &Path) -> Result<(NoiseSpectrum, SpectrumMetadata), IoError> {
    let meta: SpectrumMetadata = read_json(meta_path)?;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == SPECTRUM_HEADER => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header '{SPECTRUM_HEADER}', got '{header}'"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut freqs = Vec::new();
    let mut psd = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let f: f64 = cols
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing frequency column"))?
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad frequency: {e}")))?;
        let p: f64 = cols
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing psd column"))?
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad psd: {e}")))?;
        freqs.push(f);
        psd.push(p);
    }
    let spectrum = NoiseSpectrum {
        freqs,
        psd,
        n_av: meta.n_av,
        window: meta.window,
        sample_rate: meta.sample_rate,
        n_samples: meta.n_samples,
    };
    spectrum.validate().map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((spectrum, meta))
}

// ---------------------------------------------------------------------------
// thermal dataset table
// ---------------------------------------------------------------------------

pub const THERMAL_HEADER: &str = "t_k\tq\tb_phi0sq_per_hz\tsigma_b";

pub fn thermal_to_tsv(dataset: &ThermalDataset) -> String {
    let mut out = String::new();
    out.push_str(THERMAL_HEADER);
    out.push('\n');
    for p in &dataset.points {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            fmt_sci(p.t),
            fmt_sci(p.q),
            fmt_sci(p.b),
            fmt_sci(p.sigma_b)
        ));
    }
    out
}

pub fn write_thermal(path: &Path, dataset: &ThermalDataset) -> Result<(), IoError> {
    write_atomic(path, &thermal_to_tsv(dataset))
}

pub fn read_thermal(path: &Path) -> Result<ThermalDataset, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == THERMAL_HEADER => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header '{THERMAL_HEADER}', got '{header}'"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut points = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected 4 columns, got {}", cols.len()),
            ));
        }
        let mut vals = [0.0f64; 4];
        for (k, c) in cols.iter().enumerate() {
            vals[k] = c
                .parse()
                .map_err(|e| parse_err(path, idx + 1, format!("bad number '{c}': {e}")))?;
        }
        points.push(ThermalPoint {
            t: vals[0],
            q: vals[1],
            b: vals[2],
            sigma_b: vals[3],
        });
    }
    let ds = ThermalDataset { points };
    ds.validate().map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(ds)
}

// ---------------------------------------------------------------------------
// scan and exclusion-curve tables
// ---------------------------------------------------------------------------

pub const SCAN_HEADER: &str = "rC_m\tpsd_at_lambda1_N2perHz";
pub const CURVE_HEADER: &str = "rC_m\tlambda_upper_per_s";

pub fn scan_to_tsv(scan: &[(f64, f64)]) -> String {
    let mut out = String::new();
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for (rc, psd) in scan {
        out.push_str(&format!("{}\t{}\n", fmt_sci(*rc), fmt_sci(*psd)));
    }
    out
}

pub fn curve_to_tsv(curve: &ExclusionCurve) -> String {
    let mut out = String::new();
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for (rc, lam) in curve.rc.iter().zip(&curve.lambda_upper) {
        out.push_str(&format!("{}\t{}\n", fmt_sci(*rc), fmt_sci(*lam)));
    }
    out
}

/// Read a two-column table written by [`scan_to_tsv`] or [`curve_to_tsv`].
pub fn read_two_column(path: &Path, expected_header: &str) -> Result<Vec<(f64, f64)>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == expected_header => {}
        Some((_, header)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header '{expected_header}', got '{header}'"),
            ))
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split_whitespace();
        let a: f64 = cols
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing first column"))?
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad number: {e}")))?;
        let b: f64 = cols
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing second column"))?
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad number: {e}")))?;
        rows.push((a, b));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// JSON records
// ---------------------------------------------------------------------------

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_atomic(path, &(text + "\n"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

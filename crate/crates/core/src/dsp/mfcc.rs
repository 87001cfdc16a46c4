use std::f64::consts::PI;

use super::polar::PolarSpectrogram;
use super::stft::StftGeometry;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MELS: usize = 40;
pub const DEFAULT_COEFFS: usize = 13;
pub const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters spanning 0 Hz to Nyquist, `n_mels x bins`, each
/// row normalised to unit sum.
///
/// Triangle slopes are never narrower than one bin, so every filter touches
/// at least one bin even when mel bands are finer than the DFT grid.
pub fn mel_filterbank(n_mels: usize, geometry: &StftGeometry) -> Result<Tensor> {
    if n_mels == 0 {
        return Err(Error::Config("n_mels must be positive".into()));
    }
    let bins = geometry.bins();
    let nyquist = geometry.sample_rate as f64 / 2.0;
    let df = geometry.sample_rate as f64 / geometry.dft_size as f64;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|j| mel_to_hz(top * j as f64 / (n_mels + 1) as f64))
        .collect();
    let mut fb = vec![0.0; n_mels * bins];
    for m in 0..n_mels {
        let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let left = (c - lo).max(df);
        let right = (hi - c).max(df);
        let row = &mut fb[m * bins..(m + 1) * bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * df;
            *w = if f <= c {
                1.0 - (c - f) / left
            } else {
                1.0 - (f - c) / right
            }
            .max(0.0);
        }
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config(format!("mel filter {m} covers no bins")));
        }
        row.iter_mut().for_each(|w| *w /= total);
    }
    Tensor::matrix(n_mels, bins, fb)
}

/// Orthonormal type-II DCT matrix, `n_out x n_in`.
fn dct2_matrix(n_in: usize, n_out: usize) -> Vec<f64> {
    let mut d = vec![0.0; n_out * n_in];
    for q in 0..n_out {
        let s = if q == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        for m in 0..n_in {
            d[q * n_in + m] = s * (PI * q as f64 * (m as f64 + 0.5) / n_in as f64).cos();
        }
    }
    d
}

/// Mel-frequency cepstral coefficients, `n_coeffs x frames`.
pub fn mfcc(polar: &PolarSpectrogram, n_mels: usize, n_coeffs: usize) -> Result<Tensor> {
    if n_coeffs > n_mels {
        return Err(Error::Config(format!(
            "n_coeffs {n_coeffs} exceeds n_mels {n_mels}"
        )));
    }
    if n_coeffs == 0 {
        return Err(Error::Config("n_coeffs must be positive".into()));
    }
    let fb = mel_filterbank(n_mels, &polar.geometry)?;
    let (bins, frames) = polar.amplitude.dims2()?;
    if bins != polar.geometry.bins() {
        return Err(Error::Shape(format!(
            "amplitude has {bins} bins, geometry expects {}",
            polar.geometry.bins()
        )));
    }
    let dct = dct2_matrix(n_mels, n_coeffs);
    let amp = polar.amplitude.data();
    let mut out = vec![0.0; n_coeffs * frames];
    let mut logmel = vec![0.0; n_mels];
    for n in 0..frames {
        for (m, lm) in logmel.iter_mut().enumerate() {
            let e: f64 = (0..bins)
                .map(|k| fb.data()[m * bins + k] * amp[k * frames + n].powi(2))
                .sum();
            *lm = e.max(LOG_FLOOR).ln();
        }
        for q in 0..n_coeffs {
            out[q * frames + n] = (0..n_mels).map(|m| dct[q * n_mels + m] * logmel[m]).sum();
        }
    }
    Tensor::matrix(n_coeffs, frames, out)
}

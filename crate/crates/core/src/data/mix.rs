use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// SNR levels used for mixtures by default.
pub const SNR_GRID: [f64; 4] = [-10.0, -5.0, 0.0, 5.0];

/// A mixture and how it was made.
#[derive(Clone, Debug, PartialEq)]
pub struct Mix {
    pub mixture: Vec<f64>,
    /// The noise segment after scaling.
    pub noise: Vec<f64>,
    pub gain: f64,
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds `noise` to `clean` at `snr_db`, measured over the whole utterance.
///
/// The noise is read cyclically from an offset drawn from `seed`, so a
/// shorter noise is tiled.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64, seed: u64) -> Result<Mix> {
    if clean.is_empty() || noise.is_empty() {
        return Err(Error::Input("mixing needs non-empty clean and noise".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::Input(format!("snr {snr_db} is not finite")));
    }
    let offset = rng::stream(seed, &[rng::label("mix-offset")]).random_range(0..noise.len());
    let segment: Vec<f64> = (0..clean.len())
        .map(|n| noise[(offset + n) % noise.len()])
        .collect();
    let (pc, pn) = (power(clean), power(&segment));
    if pc == 0.0 || pn == 0.0 {
        return Err(Error::Input("clean or noise segment has zero power".into()));
    }
    let gain = (pc / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let noise: Vec<f64> = segment.iter().map(|v| gain * v).collect();
    let mixture = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    Ok(Mix {
        mixture,
        noise,
        gain,
    })
}

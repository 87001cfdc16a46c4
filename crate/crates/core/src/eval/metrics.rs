use crate::dsp::{stft, StftGeometry, BANK_HOP, BANK_WINDOWS, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Reported ratios are clamped to `[-METRIC_CAP_DB, METRIC_CAP_DB]`.
pub const METRIC_CAP_DB: f64 = 60.0;
/// Magnitude floor inside the log-spectral distance.
pub const LSD_EPSILON: f64 = 1e-10;

fn check_pair(reference: &[f64], estimate: &[f64]) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::Shape(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Input("empty signals".into()));
    }
    Ok(())
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn capped_ratio_db(signal: f64, residual: f64) -> f64 {
    if residual == 0.0 {
        return METRIC_CAP_DB;
    }
    (10.0 * (signal / residual).log10()).clamp(-METRIC_CAP_DB, METRIC_CAP_DB)
}

/// Signal-to-distortion ratio `10 log10(|s|^2 / |s - e|^2)`.
pub fn sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate)?;
    let s = energy(reference);
    if s == 0.0 {
        return Err(Error::Input("reference signal is silent".into()));
    }
    let r: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(capped_ratio_db(s, r))
}

/// Scale-invariant SDR: the estimate is compared with its projection on
/// the reference.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate)?;
    let s = energy(reference);
    if s == 0.0 || energy(estimate) == 0.0 {
        return Err(Error::Input("si_sdr needs non-silent reference and estimate".into()));
    }
    let alpha = reference.iter().zip(estimate).map(|(a, b)| a * b).sum::<f64>() / s;
    let target = alpha * alpha * s;
    let residual: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| {
            let d = b - alpha * a;
            d * d
        })
        .sum();
    Ok(capped_ratio_db(target, residual))
}

/// Log-spectral distance in dB on the 1024-sample, hop-32 analysis.
///
/// Per frame, the RMS over bins of the dB difference of magnitudes; then
/// the RMS over frames.
pub fn lsd(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate)?;
    let geometry = StftGeometry::new(BANK_WINDOWS[0], BANK_HOP, BANK_WINDOWS[0], DEFAULT_SAMPLE_RATE)?;
    let a = stft(reference, geometry)?;
    let b = stft(estimate, geometry)?;
    let (bins, frames) = a.real.dims2()?;
    let mag = |re: &[f64], im: &[f64], i: usize| re[i].hypot(im[i]);
    let mut total = 0.0;
    for n in 0..frames {
        let mut frame = 0.0;
        for k in 0..bins {
            let i = k * frames + n;
            let d = 20.0
                * ((mag(a.real.data(), a.imag.data(), i) + LSD_EPSILON).log10()
                    - (mag(b.real.data(), b.imag.data(), i) + LSD_EPSILON).log10());
            frame += d * d;
        }
        total += frame / bins as f64;
    }
    Ok((total / frames as f64).sqrt())
}

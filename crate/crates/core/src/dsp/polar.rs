use std::f64::consts::PI;

use super::stft::{ComplexSpectrogram, StftGeometry};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TWO_PI: f64 = 2.0 * PI;

/// Amplitude and time-unwrapped phase planes, `bins x frames`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarSpectrogram {
    pub amplitude: Tensor,
    pub phase: Tensor,
    pub geometry: StftGeometry,
}

impl PolarSpectrogram {
    pub fn bins(&self) -> usize {
        self.amplitude.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.amplitude.shape()[1]
    }
}

/// Principal value in `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x - TWO_PI * ((x - PI) / TWO_PI).ceil();
    if r <= -PI {
        r + TWO_PI
    } else if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

pub fn wrap_phase(phase: &Tensor) -> Tensor {
    phase.map(wrap_angle)
}

/// Unwraps each row (one frequency bin) along the frame axis.
///
/// The first frame is kept; each later frame is shifted by the multiple of
/// `2*pi` that puts its step from the previous frame in `(-pi, pi]`.
pub fn unwrap_phase(phase: &Tensor) -> Result<Tensor> {
    let (bins, frames) = phase.dims2()?;
    let src = phase.data();
    let mut out = vec![0.0; bins * frames];
    for k in 0..bins {
        let row = &src[k * frames..(k + 1) * frames];
        let dst = &mut out[k * frames..(k + 1) * frames];
        // Track the integer number of turns so each output is a single
        // rounding away from its wrapped input.
        let mut turns = 0.0f64;
        dst[0] = row[0];
        for n in 1..frames {
            let step = row[n] - row[n - 1];
            let wrapped = wrap_angle(step);
            turns += ((wrapped - step) / TWO_PI).round();
            dst[n] = row[n] + TWO_PI * turns;
        }
    }
    Tensor::matrix(bins, frames, out)
}

/// Polar form of a complex spectrogram; `0 + 0j` maps to amplitude 0,
/// phase 0.
pub fn polar_decompose(spec: &ComplexSpectrogram) -> Result<PolarSpectrogram> {
    spec.real.same_shape(&spec.imag, "polar_decompose")?;
    let amplitude = Tensor::new(
        spec.real.shape().to_vec(),
        spec.real
            .data()
            .iter()
            .zip(spec.imag.data())
            .map(|(re, im)| re.hypot(*im))
            .collect(),
    )?;
    let principal = Tensor::new(
        spec.real.shape().to_vec(),
        spec.real
            .data()
            .iter()
            .zip(spec.imag.data())
            .map(|(&re, &im)| {
                if re == 0.0 && im == 0.0 {
                    0.0
                } else {
                    wrap_angle(im.atan2(re))
                }
            })
            .collect(),
    )?;
    Ok(PolarSpectrogram {
        amplitude,
        phase: unwrap_phase(&principal)?,
        geometry: spec.geometry,
    })
}

/// `real = a cos p`, `imag = a sin p`.
pub fn polar_recompose(polar: &PolarSpectrogram) -> Result<ComplexSpectrogram> {
    polar.amplitude.same_shape(&polar.phase, "polar_recompose")?;
    if let Some(bad) = polar.amplitude.data().iter().find(|&&a| !(a >= 0.0)) {
        return Err(Error::Input(format!("negative or NaN amplitude {bad}")));
    }
    let shape = polar.amplitude.shape().to_vec();
    let a = polar.amplitude.data();
    let p = polar.phase.data();
    Ok(ComplexSpectrogram {
        real: Tensor::new(shape.clone(), a.iter().zip(p).map(|(a, p)| a * p.cos()).collect())?,
        imag: Tensor::new(shape, a.iter().zip(p).map(|(a, p)| a * p.sin()).collect())?,
        geometry: polar.geometry,
    })
}

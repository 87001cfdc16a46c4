use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Framing and transform sizes of a short-time Fourier transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftGeometry {
    pub window_size: usize,
    pub hop: usize,
    pub dft_size: usize,
    pub sample_rate: u32,
}

impl StftGeometry {
    pub fn new(window_size: usize, hop: usize, dft_size: usize, sample_rate: u32) -> Result<Self> {
        let g = StftGeometry {
            window_size,
            hop,
            dft_size,
            sample_rate,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 {
            return Err(Error::Config("hop must be positive".into()));
        }
        if self.window_size < 2 || self.window_size > self.dft_size {
            return Err(Error::Config(format!(
                "window {} must lie in [2, dft size {}]",
                self.window_size, self.dft_size
            )));
        }
        if self.hop > self.window_size {
            return Err(Error::Config(format!(
                "hop {} exceeds window {}",
                self.hop, self.window_size
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// Frequency bins kept: `dft_size/2 + 1`.
    pub fn bins(&self) -> usize {
        self.dft_size / 2 + 1
    }

    /// Frames produced for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        if len >= self.window_size {
            (len - self.window_size) / self.hop + 1
        } else {
            1
        }
    }

    /// Overlap-add with a periodic Hann window is invertible everywhere in
    /// the interior when at least two frames overlap every sample.
    pub fn check_cola(&self) -> Result<()> {
        self.validate()?;
        if 2 * self.hop > self.window_size {
            return Err(Error::Config(format!(
                "hop {} too large for Hann overlap-add with window {}",
                self.hop, self.window_size
            )));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Complex STFT grid, `bins x frames`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub real: Tensor,
    pub imag: Tensor,
    pub geometry: StftGeometry,
}

impl ComplexSpectrogram {
    pub fn bins(&self) -> usize {
        self.real.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.real.shape()[1]
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Hann-windowed STFT. Frame `n` covers samples `[n*hop, n*hop + window)`,
/// zero-padded to the DFT size; signals shorter than one window give a
/// single zero-padded frame.
pub fn stft(signal: &[f64], geometry: StftGeometry) -> Result<ComplexSpectrogram> {
    geometry.validate()?;
    if signal.is_empty() {
        return Err(Error::Input("stft of an empty signal".into()));
    }
    let StftGeometry {
        window_size,
        hop,
        dft_size,
        ..
    } = geometry;
    let bins = geometry.bins();
    let frames = geometry.frames(signal.len());
    let window = hann_window(window_size);
    let fft = plan(dft_size, false);
    let mut buf = vec![Complex::new(0.0, 0.0); dft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut real = vec![0.0; bins * frames];
    let mut imag = vec![0.0; bins * frames];
    for n in 0..frames {
        buf.fill(Complex::new(0.0, 0.0));
        let start = n * hop;
        for (i, w) in window.iter().enumerate() {
            if let Some(&x) = signal.get(start + i) {
                buf[i].re = x * w;
            }
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..bins {
            real[k * frames + n] = buf[k].re;
            imag[k * frames + n] = buf[k].im;
        }
    }
    Ok(ComplexSpectrogram {
        real: Tensor::matrix(bins, frames, real)?,
        imag: Tensor::matrix(bins, frames, imag)?,
        geometry,
    })
}

/// Weighted overlap-add inverse of [`stft`], normalised by the summed squared
/// window, then trimmed or zero-extended to `length` samples.
pub fn istft(spec: &ComplexSpectrogram, length: usize) -> Result<Vec<f64>> {
    let geometry = spec.geometry;
    geometry.check_cola()?;
    spec.real.same_shape(&spec.imag, "istft real/imag")?;
    let (bins, frames) = spec.real.dims2()?;
    if bins != geometry.bins() {
        return Err(Error::Shape(format!(
            "spectrogram has {bins} bins, geometry expects {}",
            geometry.bins()
        )));
    }
    let StftGeometry {
        window_size,
        hop,
        dft_size,
        ..
    } = geometry;
    let window = hann_window(window_size);
    let ifft = plan(dft_size, true);
    let mut buf = vec![Complex::new(0.0, 0.0); dft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let span = (frames - 1) * hop + window_size;
    let mut out = vec![0.0; span.max(length)];
    let mut norm = vec![0.0; span.max(length)];
    let scale = 1.0 / dft_size as f64;
    for n in 0..frames {
        for k in 0..bins {
            let c = Complex::new(spec.real.at2(k, n), spec.imag.at2(k, n));
            buf[k] = c;
            if k > 0 && k < dft_size - k {
                buf[dft_size - k] = c.conj();
            }
        }
        // DC and Nyquist of a real signal are real.
        buf[0].im = 0.0;
        if dft_size % 2 == 0 {
            buf[dft_size / 2].im = 0.0;
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = n * hop;
        for (i, w) in window.iter().enumerate() {
            out[start + i] += buf[i].re * scale * w;
            norm[start + i] += w * w;
        }
    }
    for (o, &w) in out.iter_mut().zip(&norm) {
        *o = if w > 1e-10 { *o / w } else { 0.0 };
    }
    out.truncate(length);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geo(w: usize, hop: usize, dft: usize) -> StftGeometry {
        StftGeometry::new(w, hop, dft, 16_000).unwrap()
    }

    /// Direct O(N^2) DFT of one windowed frame.
    fn brute_dft_mag(frame: &[f64], dft: usize, k: usize) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (m, &x) in frame.iter().enumerate() {
            let a = -2.0 * PI * (k * m) as f64 / dft as f64;
            re += x * a.cos();
            im += x * a.sin();
        }
        re.hypot(im)
    }

    #[test]
    fn zero_signal_zero_spectrogram() {
        let s = stft(&vec![0.0; 3000], geo(1024, 32, 1024)).unwrap();
        assert_eq!(s.real.max_abs(), 0.0);
        assert_eq!(s.imag.max_abs(), 0.0);
        assert_eq!(s.bins(), 513);
        assert_eq!(s.frames(), (3000 - 1024) / 32 + 1);
    }

    #[test]
    fn impulse_only_touches_first_frame() {
        let mut x = vec![0.0; 2048];
        // Sample 0 sits on the zero of the periodic Hann window, so place the
        // impulse inside frame 0 but before frame 1 starts.
        x[5] = 1.0;
        let s = stft(&x, geo(1024, 32, 1024)).unwrap();
        let energy = |n: usize| -> f64 {
            (0..s.bins())
                .map(|k| s.real.at2(k, n).powi(2) + s.imag.at2(k, n).powi(2))
                .sum()
        };
        assert!(energy(0) > 0.0);
        for n in 1..s.frames() {
            assert_eq!(energy(n), 0.0, "frame {n}");
        }
    }

    #[test]
    fn sinusoid_peaks_at_its_bin() {
        let g = geo(1024, 32, 1024);
        let k0 = 37;
        let f = k0 as f64 * 16_000.0 / 1024.0;
        let x: Vec<f64> = (0..4096)
            .map(|n| (2.0 * PI * f * n as f64 / 16_000.0 + 0.3).sin())
            .collect();
        let s = stft(&x, g).unwrap();
        let mean_mag: Vec<f64> = (0..s.bins())
            .map(|k| {
                (0..s.frames())
                    .map(|n| s.real.at2(k, n).hypot(s.imag.at2(k, n)))
                    .sum::<f64>()
                    / s.frames() as f64
            })
            .collect();
        let argmax = (0..mean_mag.len())
            .max_by(|&a, &b| mean_mag[a].total_cmp(&mean_mag[b]))
            .unwrap();
        assert_eq!(argmax, k0);
        // Brute-force DFT oracle agrees on frame 3 around the peak.
        let w = hann_window(1024);
        let frame: Vec<f64> = (0..1024).map(|i| x[3 * 32 + i] * w[i]).collect();
        for k in [k0 - 1, k0, k0 + 1] {
            let want = brute_dft_mag(&frame, 1024, k);
            let got = s.real.at2(k, 3).hypot(s.imag.at2(k, 3));
            assert!((want - got).abs() < 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn round_trip_all_bank_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..6000).map(|_| rng.random_range(-1.0..1.0)).collect();
        for w in [1024, 512, 256, 128] {
            let g = geo(w, 32, w);
            let y = istft(&stft(&x, g).unwrap(), x.len()).unwrap();
            let interior = w..(g.frames(x.len()) - 1) * 32 + 1;
            let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = interior
                .map(|i| (x[i] - y[i]).abs())
                .fold(0.0f64, f64::max);
            assert!(err / peak <= 1e-10, "window {w}: {err}");
        }
    }

    #[test]
    fn zero_spectrogram_inverts_to_zero() {
        let g = geo(256, 32, 256);
        let spec = ComplexSpectrogram {
            real: Tensor::zeros(&[129, 10]),
            imag: Tensor::zeros(&[129, 10]),
            geometry: g,
        };
        let y = istft(&spec, 500).unwrap();
        assert_eq!(y.len(), 500);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parseval_within_one_percent() {
        let g = geo(1024, 32, 1024);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1024).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = stft(&x, g).unwrap();
        let w = hann_window(1024);
        let time: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
        // One-sided spectrum: interior bins count twice.
        let freq: f64 = (0..s.bins())
            .map(|k| {
                let p = s.real.at2(k, 0).powi(2) + s.imag.at2(k, 0).powi(2);
                if k == 0 || k == s.bins() - 1 {
                    p
                } else {
                    2.0 * p
                }
            })
            .sum::<f64>()
            / 1024.0;
        assert!((time - freq).abs() / time < 0.01);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            StftGeometry::new(1024, 0, 1024, 16_000),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            StftGeometry::new(1024, 32, 512, 16_000),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            stft(&[], geo(128, 32, 128)),
            Err(Error::Input(_))
        ));
        let g = StftGeometry::new(128, 100, 128, 16_000).unwrap();
        let s = stft(&[1.0; 400], g).unwrap();
        assert!(matches!(istft(&s, 400), Err(Error::Config(_))));
    }
}

use super::polar::{polar_decompose, PolarSpectrogram};
use super::stft::{stft, StftGeometry};
use crate::error::{Error, Result};

/// Window sizes of the analysis bank, coarsest first.
pub const BANK_WINDOWS: [usize; 4] = [1024, 512, 256, 128];
/// Frame shift shared by every resolution.
pub const BANK_HOP: usize = 32;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Polar spectra of one signal at several window sizes with a common hop.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiResSpectra {
    bank: Vec<PolarSpectrogram>,
}

impl MultiResSpectra {
    pub fn new(bank: Vec<PolarSpectrogram>) -> Result<Self> {
        if bank.len() != BANK_WINDOWS.len() {
            return Err(Error::Shape(format!(
                "bank needs {} resolutions, got {}",
                BANK_WINDOWS.len(),
                bank.len()
            )));
        }
        let g0 = bank[0].geometry;
        for pair in bank.windows(2) {
            let (a, b) = (pair[0].geometry, pair[1].geometry);
            if b.window_size >= a.window_size {
                return Err(Error::Shape("bank windows must strictly decrease".into()));
            }
            if b.hop != g0.hop || b.sample_rate != g0.sample_rate {
                return Err(Error::Shape("bank hop and sample rate must agree".into()));
            }
        }
        for p in &bank {
            p.amplitude.same_shape(&p.phase, "bank entry")?;
        }
        Ok(MultiResSpectra { bank })
    }

    pub fn bank(&self) -> &[PolarSpectrogram] {
        &self.bank
    }

    pub fn get(&self, i: usize) -> &PolarSpectrogram {
        &self.bank[i]
    }

    pub fn len(&self) -> usize {
        self.bank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bank.is_empty()
    }

    /// Frames of the coarsest resolution.
    pub fn base_frames(&self) -> usize {
        self.bank[0].frames()
    }
}

/// Geometry of bank entry `i` at `sample_rate`.
pub fn bank_geometry(i: usize, sample_rate: u32) -> Result<StftGeometry> {
    let w = BANK_WINDOWS[i];
    StftGeometry::new(w, BANK_HOP, w, sample_rate)
}

/// Frames to skip at resolution `i` so its frames are centred on the same
/// instants as the coarsest resolution's frames.
pub fn frame_offset(i: usize) -> usize {
    (BANK_WINDOWS[0] - BANK_WINDOWS[i]) / (2 * BANK_HOP)
}

/// Frame count of resolution `i` for a signal of `len` samples.
pub fn bank_frames(i: usize, len: usize) -> usize {
    (len - BANK_WINDOWS[i]) / BANK_HOP + 1
}

pub fn multi_res(signal: &[f64], sample_rate: u32) -> Result<MultiResSpectra> {
    if signal.len() < BANK_WINDOWS[0] {
        return Err(Error::Input(format!(
            "signal of {} samples is shorter than the {}-sample analysis window",
            signal.len(),
            BANK_WINDOWS[0]
        )));
    }
    let bank = (0..BANK_WINDOWS.len())
        .map(|i| polar_decompose(&stft(signal, bank_geometry(i, sample_rate)?)?))
        .collect::<Result<Vec<_>>>()?;
    MultiResSpectra::new(bank)
}

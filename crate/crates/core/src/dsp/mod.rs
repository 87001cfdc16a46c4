//! Short-time Fourier analysis and synthesis, polar form, phase unwrapping,
//! the multi-resolution bank, MFCCs and WAV I/O.

mod bank;
mod mfcc;
mod polar;
mod stft;
mod wav;

pub use bank::{
    bank_frames, bank_geometry, frame_offset, multi_res, MultiResSpectra, BANK_HOP, BANK_WINDOWS,
    DEFAULT_SAMPLE_RATE,
};
pub use mfcc::{mel_filterbank, mfcc, DEFAULT_COEFFS, DEFAULT_MELS, LOG_FLOOR};
pub use polar::{polar_decompose, polar_recompose, unwrap_phase, wrap_angle, wrap_phase, PolarSpectrogram};
pub use stft::{hann_window, istft, stft, ComplexSpectrogram, StftGeometry};
pub use wav::{read_wav, write_wav, Audio};

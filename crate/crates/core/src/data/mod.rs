//! Manifests, SNR-controlled mixing, the synthetic corpus and WAV ingestion.

mod ingest;
mod load;
mod manifest;
mod mix;
mod synth;

pub use ingest::{content_id, ingest};
pub use load::load_signals;
pub use manifest::{mixture_id, Manifest, ManifestEntry, Role, Split};
pub use mix::{mix_at_snr, power, Mix, SNR_GRID};
pub use synth::{synth_corpus, synth_noise, synth_speech, CorpusConfig, NoiseKind, NOISE_KINDS};

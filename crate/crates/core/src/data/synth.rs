use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::manifest::{mixture_id, Manifest, ManifestEntry, Role, Split};
use super::mix::{mix_at_snr, power, SNR_GRID};
use crate::dsp::write_wav;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseKind {
    Stationary,
    Babble,
    Cafe,
}

pub const NOISE_KINDS: [NoiseKind; 3] = [NoiseKind::Stationary, NoiseKind::Babble, NoiseKind::Cafe];

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Stationary => "stationary",
            NoiseKind::Babble => "babble",
            NoiseKind::Cafe => "cafe",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NOISE_KINDS
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise kind `{s}`")))
    }
}

/// Sizes and conditions of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub n_fae: usize,
    pub n_dae: usize,
    pub n_test: usize,
    pub utterance_len: usize,
    pub sample_rate: u32,
    pub snr_grid: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
    /// Noise recordings are this many utterances long.
    pub noise_len_factor: usize,
}

impl CorpusConfig {
    pub fn desk() -> Self {
        CorpusConfig {
            n_fae: 12,
            n_dae: 188,
            n_test: 30,
            utterance_len: 2048,
            sample_rate: 16_000,
            snr_grid: SNR_GRID.to_vec(),
            noise_kinds: NOISE_KINDS.to_vec(),
            noise_len_factor: 4,
        }
    }

    pub fn paper() -> Self {
        CorpusConfig {
            utterance_len: 32_000,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fae == 0 || self.n_dae == 0 || self.n_test == 0 {
            return Err(Error::Config("every split needs at least one utterance".into()));
        }
        if self.utterance_len < 1024 {
            return Err(Error::Config(format!(
                "utterance length {} is below the 1024-sample analysis window",
                self.utterance_len
            )));
        }
        if self.snr_grid.is_empty() || self.noise_kinds.is_empty() || self.noise_len_factor == 0 {
            return Err(Error::Config("snr grid and noise kinds must be non-empty".into()));
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr grid must be finite".into()));
        }
        Ok(())
    }
}

/// Target RMS of generated clean speech; leaves headroom for -10 dB mixtures.
const CLEAN_RMS: f64 = 0.03;

/// Harmonic stack with a pitch contour, formant emphasis and syllable-like
/// envelope.
pub fn synth_speech(rng: &mut impl Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let dur = len as f64 / fs;
    let f0_base = rng.random_range(90.0..240.0);
    let vib_depth = rng.random_range(0.02..0.08);
    let vib_rate = rng.random_range(2.0..6.0);
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let glide = rng.random_range(-0.15..0.15);
    let formants = [
        (rng.random_range(300.0..850.0), 90.0, 1.0),
        (rng.random_range(900.0..2300.0), 140.0, 0.6),
        (rng.random_range(2400.0..3300.0), 200.0, 0.3),
    ];
    let gain = |f: f64| -> f64 {
        let bumps: f64 = formants
            .iter()
            .map(|&(c, bw, w)| w * (-0.5 * ((f - c) / bw).powi(2)).exp())
            .sum();
        (0.08 + bumps) / (1.0 + f / 1000.0)
    };
    let top = 5000.0f64.min(0.45 * fs);
    let n_harm = ((top / (f0_base * 1.3)).floor() as usize).max(1);
    let phases0: Vec<f64> = (0..n_harm).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let n_syll = rng.random_range(1..=3);
    let sylls: Vec<(f64, f64)> = (0..n_syll)
        .map(|_| (rng.random_range(0.1..0.9) * dur, rng.random_range(0.25..0.6) * dur))
        .collect();
    let mut out = vec![0.0; len];
    let mut cycles = 0.0;
    for (n, o) in out.iter_mut().enumerate() {
        let t = n as f64 / fs;
        let f0 = f0_base * (1.0 + vib_depth * (2.0 * PI * vib_rate * t + vib_phase).sin() + glide * (t / dur - 0.5));
        cycles += f0 / fs;
        let env: f64 = 0.05
            + sylls
                .iter()
                .map(|&(c, w)| {
                    let x = (t - c) / w;
                    if x.abs() < 0.5 {
                        0.5 + 0.5 * (2.0 * PI * x).cos()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>();
        let mut s = 0.0;
        for (h, p0) in phases0.iter().enumerate() {
            let k = (h + 1) as f64;
            if k * f0 >= top {
                break;
            }
            s += gain(k * f0) * (2.0 * PI * k * cycles + p0).sin();
        }
        *o = env * s;
    }
    let scale = CLEAN_RMS / power(&out).sqrt().max(1e-12);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Noise recording of the given kind, normalised to unit RMS times 0.03.
pub fn synth_noise(kind: NoiseKind, rng: &mut impl Rng, len: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let white = |rng: &mut dyn rand::RngCore, n: usize| -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    };
    let mut out = match kind {
        NoiseKind::Stationary => white(rng, len),
        NoiseKind::Babble => {
            let mut acc = vec![0.0; len];
            for _ in 0..6 {
                for (a, s) in acc.iter_mut().zip(synth_speech(rng, len, sample_rate)) {
                    *a += s;
                }
            }
            acc
        }
        NoiseKind::Cafe => {
            let w = white(rng, len);
            let rate = rng.random_range(0.5..2.0);
            let mut lp = 0.0;
            let mut out: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(n, &x)| {
                    lp = 0.95 * lp + 0.3 * x;
                    let m = 1.0 + 0.5 * (2.0 * PI * rate * n as f64 / fs).sin();
                    m * (lp + 0.2 * x)
                })
                .collect();
            let clatters = (len / 1500).max(1);
            for _ in 0..clatters {
                let at = rng.random_range(0..len);
                let f = rng.random_range(2000.0..5000.0);
                let amp = rng.random_range(1.0..3.0);
                for (i, o) in out[at..].iter_mut().take(400).enumerate() {
                    let t = i as f64 / fs;
                    *o += amp * (-t * 300.0).exp() * (2.0 * PI * f * t).sin();
                }
            }
            out
        }
    };
    let scale = CLEAN_RMS / power(&out).sqrt().max(1e-12);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

fn entry(id: String, path: &Path, role: Role, split: Split, snr: Option<f64>, kind: Option<NoiseKind>) -> ManifestEntry {
    ManifestEntry {
        id,
        path: path.to_path_buf(),
        role,
        split,
        snr_db: snr,
        noise_kind: kind.map(|k| k.name().to_string()),
    }
}

/// Writes a synthetic corpus under `out` and returns its manifest (also
/// saved as `out/manifest.tsv`).
///
/// FAE gets clean utterances only, DAE gets mixtures of other utterances
/// with one random noise and SNR each, and every test utterance is mixed
/// at every (noise, SNR) condition.
pub fn synth_corpus(cfg: &CorpusConfig, seed: u64, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let len = cfg.utterance_len;
    let sr = cfg.sample_rate;
    let mut entries = Vec::new();
    let splits = [(Split::Fae, cfg.n_fae), (Split::Dae, cfg.n_dae), (Split::Test, cfg.n_test)];
    let mut noises = Vec::new();
    for (split, _) in splits {
        for &kind in &cfg.noise_kinds {
            let mut r = rng::stream(seed, &[rng::label("noise"), split as u64, kind as u64]);
            let noise = synth_noise(kind, &mut r, len * cfg.noise_len_factor, sr);
            let path = out.join("noise").join(format!("{split}_{kind}.wav"));
            write_wav(&path, &noise, sr)?;
            entries.push(entry(format!("noise-{kind}-{split}"), &path, Role::Noise, split, None, Some(kind)));
            noises.push(((split, kind), noise));
        }
    }
    let noise_of = |split: Split, kind: NoiseKind| -> &[f64] {
        &noises.iter().find(|(k, _)| *k == (split, kind)).expect("generated above").1
    };
    for (split, count) in splits {
        for i in 0..count {
            let id = format!("{split}{i:03}");
            let mut r = rng::stream(seed, &[rng::label("speech"), split as u64, i as u64]);
            let clean = synth_speech(&mut r, len, sr);
            let conditions: Vec<(NoiseKind, f64)> = match split {
                Split::Fae => Vec::new(),
                Split::Dae => vec![(
                    cfg.noise_kinds[r.random_range(0..cfg.noise_kinds.len())],
                    cfg.snr_grid[r.random_range(0..cfg.snr_grid.len())],
                )],
                Split::Test => cfg
                    .noise_kinds
                    .iter()
                    .flat_map(|&k| cfg.snr_grid.iter().map(move |&s| (k, s)))
                    .collect(),
            };
            if split != Split::Dae {
                let path = out.join("clean").join(format!("{id}.wav"));
                write_wav(&path, &clean, sr)?;
                entries.push(entry(id.clone(), &path, Role::Clean, split, None, None));
            }
            for (c, (kind, snr)) in conditions.into_iter().enumerate() {
                let mix_seed = rng::derive_seed(seed, &[rng::label("mix"), split as u64, i as u64, c as u64]);
                let m = mix_at_snr(&clean, noise_of(split, kind), snr, mix_seed)?;
                let peak = m.mixture.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if peak >= 1.0 {
                    return Err(Error::Data(format!("mixture {id} at {snr} dB clips (peak {peak})")));
                }
                let mid = mixture_id(&id, kind.name(), snr);
                let path = out.join("mix").join(split.to_string()).join(format!("{id}_{kind}_{snr}.wav"));
                write_wav(&path, &m.mixture, sr)?;
                entries.push(entry(mid, &path, Role::Mixture, split, Some(snr), Some(kind)));
            }
        }
    }
    let manifest = Manifest::new(entries)?;
    manifest.save(&out.join("manifest.tsv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{read_wav, stft, StftGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Fraction of STFT energy in bins below `hz`.
    fn energy_below(x: &[f64], hz: f64) -> f64 {
        let g = StftGeometry::new(1024, 256, 1024, 16_000).unwrap();
        let s = stft(x, g).unwrap();
        let (mut lo, mut all) = (0.0, 0.0);
        for k in 0..s.bins() {
            let f = k as f64 * 16_000.0 / 1024.0;
            for n in 0..s.frames() {
                let e = s.real.at2(k, n).powi(2) + s.imag.at2(k, n).powi(2);
                all += e;
                if f < hz {
                    lo += e;
                }
            }
        }
        lo / all
    }

    #[test]
    fn speech_is_band_limited() {
        for seed in 0..10 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x = synth_speech(&mut r, 4096, 16_000);
            assert!(energy_below(&x, 8000.0) >= 0.9);
            assert!(energy_below(&x, 4000.0) >= 0.9);
            assert!((power(&x).sqrt() - CLEAN_RMS).abs() < 1e-12);
        }
    }

    #[test]
    fn small_corpus_is_reproducible_and_disjoint() {
        let cfg = CorpusConfig {
            n_fae: 2,
            n_dae: 3,
            n_test: 2,
            utterance_len: 1200,
            ..CorpusConfig::desk()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = synth_corpus(&cfg, 42, a.path()).unwrap();
        let mb = synth_corpus(&cfg, 42, b.path()).unwrap();
        assert_eq!(ma.entries.len(), mb.entries.len());
        for (x, y) in ma.entries.iter().zip(&mb.entries) {
            assert_eq!(x.id, y.id);
            assert_eq!(std::fs::read(&x.path).unwrap(), std::fs::read(&y.path).unwrap());
        }
        assert_eq!(ma.select(Role::Clean, Split::Fae).len(), 2);
        assert_eq!(ma.select(Role::Mixture, Split::Dae).len(), 3);
        assert_eq!(ma.select(Role::Mixture, Split::Test).len(), 2 * 12);
        assert!(ma.select(Role::Clean, Split::Dae).is_empty());
        let reloaded = Manifest::load(&a.path().join("manifest.tsv")).unwrap();
        assert_eq!(reloaded, ma);
        let w = read_wav(&ma.entries[0].path).unwrap();
        assert_eq!(w.samples.len(), 1200 * 4);
        let other = tempfile::tempdir().unwrap();
        let c = synth_corpus(&cfg, 43, other.path()).unwrap();
        assert_ne!(std::fs::read(&c.entries[9].path).unwrap(), std::fs::read(&ma.entries[9].path).unwrap());
    }

    #[test]
    fn noise_kinds_parse() {
        for k in NOISE_KINDS {
            assert_eq!(k.name().parse::<NoiseKind>().unwrap(), k);
        }
        assert!(matches!("rain".parse::<NoiseKind>(), Err(Error::Config(_))));
    }
}

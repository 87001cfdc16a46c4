//! Run configuration: a plain-text `key = value` file with `[dsp]`,
//! `[model]`, `[train]` and `[data]` sections, layered over a preset.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::data::{CorpusConfig, NoiseKind};
use crate::error::{Error, Result};
use crate::model::ArchConfig;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }
}

/// Everything a command needs to reproduce a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub corpus: CorpusConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => RunConfig {
                preset,
                arch: ArchConfig::desk(),
                train: TrainConfig::desk(),
                corpus: CorpusConfig::desk(),
            },
            Preset::Paper => RunConfig {
                preset,
                arch: ArchConfig::paper(),
                train: TrainConfig::paper(),
                corpus: CorpusConfig::paper(),
            },
        }
    }

    pub fn desk() -> Self {
        Self::preset(Preset::Desk)
    }

    pub fn paper() -> Self {
        Self::preset(Preset::Paper)
    }

    /// Applies one setting.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let a = &mut self.arch;
        let t = &mut self.train;
        let c = &mut self.corpus;
        match (section, key) {
            ("dsp", "sample_rate") => {
                let sr = parse(key, value)?;
                a.sample_rate = sr;
                c.sample_rate = sr;
            }
            ("model", "fae_schedule") => a.fae_schedule = parse_list(key, value)?,
            ("model", "dae_schedule") => a.dae_schedule = parse_list(key, value)?,
            ("model", "kernel") => a.kernel = parse(key, value)?,
            ("model", "slope") => a.slope = parse(key, value)?,
            ("model", "multi_resolution") => a.multi_resolution = parse(key, value)?,
            ("model", "phase_aware") => a.phase_aware = parse(key, value)?,
            ("train", "lr") => t.adam.lr = parse(key, value)?,
            ("train", "beta1") => t.adam.beta1 = parse(key, value)?,
            ("train", "beta2") => t.adam.beta2 = parse(key, value)?,
            ("train", "epsilon") => t.adam.epsilon = parse(key, value)?,
            ("train", "batch") => t.batch = parse(key, value)?,
            ("train", "fae_epochs") => t.fae_epochs = parse(key, value)?,
            ("train", "dae_epochs") => t.dae_epochs = parse(key, value)?,
            ("train", "theta1") => t.weights.theta1 = parse(key, value)?,
            ("train", "theta2") => t.weights.theta2 = parse(key, value)?,
            ("train", "theta3") => t.weights.theta3 = parse(key, value)?,
            ("train", "loss_reduction") => t.reduction = value.parse()?,
            ("train", "seed") => t.seed = parse(key, value)?,
            ("train", "ccc") => t.ccc = parse(key, value)?,
            ("train", "clip_norm") => t.clip_norm = parse(key, value)?,
            ("train", "checkpoint_every") => t.checkpoint_every = parse(key, value)?,
            ("train", "copy_decoders") => t.copy_decoders = parse(key, value)?,
            ("train", "align_weight") => t.align_weight = parse(key, value)?,
            ("data", "n_fae") => c.n_fae = parse(key, value)?,
            ("data", "n_dae") => c.n_dae = parse(key, value)?,
            ("data", "n_test") => c.n_test = parse(key, value)?,
            ("data", "utterance_len") => c.utterance_len = parse(key, value)?,
            ("data", "snr_grid") => c.snr_grid = parse_list(key, value)?,
            ("data", "noise_kinds") => c.noise_kinds = parse_list::<NoiseKind>(key, value)?,
            ("data", "noise_len_factor") => c.noise_len_factor = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown setting `{key}` in section [{section}]"))),
        }
        Ok(())
    }

    /// Layers `text` over this configuration. Blank lines and `#` comments
    /// are ignored; every setting must sit inside a section.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: Error| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["dsp", "model", "train", "data"].contains(&name) {
                    return Err(at(Error::Config(format!("unknown section [{name}]"))));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(Error::Config(format!("expected `key = value`, got `{line}`"))))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| at(Error::Config("setting before any section header".into())))?;
            self.set(sec, key.trim(), value.trim()).map_err(at)?;
        }
        Ok(())
    }

    /// Preset, then the optional file, then validation.
    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::preset(preset);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            cfg.apply_text(&text)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate(&self.arch)?;
        self.corpus.validate()?;
        if self.arch.sample_rate != self.corpus.sample_rate {
            return Err(Error::Config("model and corpus sample rates differ".into()));
        }
        Ok(())
    }

    /// Every resolved setting, in a form `apply_text` reads back.
    pub fn to_text(&self) -> String {
        let a = &self.arch;
        let t = &self.train;
        let c = &self.corpus;
        let kinds: Vec<&str> = c.noise_kinds.iter().map(|k| k.name()).collect();
        let snr: Vec<String> = c.snr_grid.iter().map(|&x| float(x)).collect();
        format!(
            "# preset: {}\n\
             [dsp]\nsample_rate = {}\n\n\
             [model]\nfae_schedule = {}\ndae_schedule = {}\nkernel = {}\nslope = {}\nmulti_resolution = {}\nphase_aware = {}\n\n\
             [train]\nlr = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\nbatch = {}\nfae_epochs = {}\ndae_epochs = {}\n\
             theta1 = {}\ntheta2 = {}\ntheta3 = {}\nloss_reduction = {}\nseed = {}\nccc = {}\nclip_norm = {}\ncheckpoint_every = {}\n\
             copy_decoders = {}\nalign_weight = {}\n\n\
             [data]\nn_fae = {}\nn_dae = {}\nn_test = {}\nutterance_len = {}\nsnr_grid = {}\nnoise_kinds = {}\nnoise_len_factor = {}\n",
            self.preset.name(),
            a.sample_rate,
            join(&a.fae_schedule),
            join(&a.dae_schedule),
            a.kernel,
            float(a.slope),
            a.multi_resolution,
            a.phase_aware,
            float(t.adam.lr),
            float(t.adam.beta1),
            float(t.adam.beta2),
            float(t.adam.epsilon),
            t.batch,
            t.fae_epochs,
            t.dae_epochs,
            float(t.weights.theta1),
            float(t.weights.theta2),
            float(t.weights.theta3),
            t.reduction.name(),
            t.seed,
            t.ccc,
            float(t.clip_norm),
            t.checkpoint_every,
            t.copy_decoders,
            float(t.align_weight),
            c.n_fae,
            c.n_dae,
            c.n_test,
            c.utterance_len,
            snr.join(","),
            kinds.join(","),
            c.noise_len_factor,
        )
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

//! The two variational autoencoders: a convolutional encoder fed by every
//! bank resolution and amplitude/phase decoders with one head per
//! resolution.

mod decoder;
mod encoder;
mod enhance;

use std::path::Path;

use rand::Rng;

pub use decoder::{decode, Plane};
pub use encoder::{encode, encoder_features, EncoderOutput, PHASE_INPUT_SCALE};
pub use enhance::enhance;

use crate::dsp::{MultiResSpectra, BANK_WINDOWS, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Graph, Params, Tensor, Var};

pub const FAE_SCHEDULE: [usize; 4] = [512, 256, 128, 64];
pub const DAE_SCHEDULE: [usize; 6] = [512, 400, 300, 200, 100, 64];
pub const DESK_FAE_SCHEDULE: [usize; 4] = [64, 32, 16, 8];
pub const DESK_DAE_SCHEDULE: [usize; 6] = [64, 50, 38, 25, 13, 8];

/// Parameter-name prefixes of the six networks.
pub const E1: &str = "e1";
pub const D11: &str = "d11";
pub const D12: &str = "d12";
pub const E2: &str = "e2";
pub const D21: &str = "d21";
pub const D22: &str = "d22";

/// Shape of both autoencoders and which inputs they see.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub fae_schedule: Vec<usize>,
    pub dae_schedule: Vec<usize>,
    pub kernel: usize,
    pub slope: f64,
    pub multi_resolution: bool,
    pub phase_aware: bool,
    pub sample_rate: u32,
}

impl ArchConfig {
    pub fn desk() -> Self {
        ArchConfig {
            fae_schedule: DESK_FAE_SCHEDULE.to_vec(),
            dae_schedule: DESK_DAE_SCHEDULE.to_vec(),
            kernel: 7,
            slope: 0.2,
            multi_resolution: true,
            phase_aware: true,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }

    pub fn paper() -> Self {
        ArchConfig {
            fae_schedule: FAE_SCHEDULE.to_vec(),
            dae_schedule: DAE_SCHEDULE.to_vec(),
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n_res = self.n_res();
        for (name, s) in [("fae", &self.fae_schedule), ("dae", &self.dae_schedule)] {
            if s.len() < n_res {
                return Err(Error::Config(format!(
                    "{name} schedule has {} layers, needs at least {n_res}",
                    s.len()
                )));
            }
            if s.iter().any(|&c| c == 0) {
                return Err(Error::Config(format!("{name} schedule has a zero width")));
            }
        }
        if self.fae_schedule.last() != self.dae_schedule.last() {
            return Err(Error::Config(
                "fae and dae schedules must end in the same latent size".into(),
            ));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!("kernel {} must be odd", self.kernel)));
        }
        if !(self.slope >= 0.0 && self.slope < 1.0) {
            return Err(Error::Config(format!("leaky slope {} outside [0, 1)", self.slope)));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        *self.fae_schedule.last().expect("validated schedule")
    }

    /// Resolutions fed to the encoders and emitted by the decoders.
    pub fn n_res(&self) -> usize {
        if self.multi_resolution {
            BANK_WINDOWS.len()
        } else {
            1
        }
    }

    /// Same-length padding of every convolution.
    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

/// Bank planes recorded on a tape.
#[derive(Clone, Debug)]
pub struct BankVars {
    pub amplitude: Vec<Var>,
    pub phase: Vec<Var>,
}

impl BankVars {
    /// Records the first `n_res` resolutions of `spectra` as constants.
    pub fn record(graph: &mut Graph, spectra: &MultiResSpectra, n_res: usize) -> Self {
        let bank = &spectra.bank()[..n_res];
        BankVars {
            amplitude: bank.iter().map(|p| graph.constant(p.amplitude.clone())).collect(),
            phase: bank.iter().map(|p| graph.constant(p.phase.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }
}

/// Glorot-uniform `[out, in, k]` kernel and zero bias.
fn conv_params(params: &mut Params, name: &str, c_out: usize, c_in: usize, k: usize, rng: &mut impl Rng) {
    let limit = (6.0 / ((c_in * k + c_out * k) as f64)).sqrt();
    let w = Tensor::from_fn(&[c_out, c_in, k], |_| rng.random_range(-limit..=limit));
    params.insert(format!("{name}.weight"), w);
    params.insert(format!("{name}.bias"), Tensor::zeros(&[c_out]));
}

/// Bins of bank resolution `i`.
pub fn bank_bins(i: usize) -> usize {
    BANK_WINDOWS[i] / 2 + 1
}

fn input_channels(arch: &ArchConfig) -> usize {
    let base = bank_bins(0);
    if arch.phase_aware {
        2 * base
    } else {
        base
    }
}

/// Encoder parameters: `layer{l}` convolutions and `inject{i}` 1x1
/// projections for resolutions after the first.
pub fn init_encoder(params: &mut Params, prefix: &str, schedule: &[usize], arch: &ArchConfig, seed: u64) {
    let mut rng = rng::stream(seed, &[rng::label(prefix)]);
    let c_in = input_channels(arch);
    let n = schedule.len();
    for l in 0..n {
        let fan_in = if l == 0 { c_in } else { schedule[l - 1] };
        let fan_out = if l + 1 == n { 2 * schedule[l] } else { schedule[l] };
        conv_params(params, &format!("{prefix}.layer{}", l + 1), fan_out, fan_in, arch.kernel, &mut rng);
    }
    for i in 1..arch.n_res() {
        conv_params(params, &format!("{prefix}.inject{}", i + 1), schedule[i - 1], c_in, 1, &mut rng);
    }
}

/// Decoder parameters: `trunk{j}` convolutions up the reversed schedule,
/// `stage{i}` convolutions chaining the heads, and one `head{i}` per
/// resolution.
pub fn init_decoder(params: &mut Params, prefix: &str, schedule: &[usize], arch: &ArchConfig, seed: u64) {
    let mut rng = rng::stream(seed, &[rng::label(prefix)]);
    let rev: Vec<usize> = schedule.iter().rev().copied().collect();
    for j in 1..rev.len() {
        conv_params(params, &format!("{prefix}.trunk{j}"), rev[j], rev[j - 1], arch.kernel, &mut rng);
    }
    let width = *rev.last().expect("non-empty schedule");
    for i in 0..arch.n_res() {
        if i > 0 {
            conv_params(params, &format!("{prefix}.stage{}", i + 1), width, width, arch.kernel, &mut rng);
        }
        conv_params(params, &format!("{prefix}.head{}", i + 1), bank_bins(i), width, arch.kernel, &mut rng);
    }
}

/// Fresh E1, D11 and (when phase-aware) D12.
pub fn init_fae(arch: &ArchConfig, seed: u64) -> Result<Params> {
    arch.validate()?;
    let mut p = Params::new();
    init_encoder(&mut p, E1, &arch.fae_schedule, arch, seed);
    init_decoder(&mut p, D11, &arch.fae_schedule, arch, seed);
    if arch.phase_aware {
        init_decoder(&mut p, D12, &arch.fae_schedule, arch, seed);
    }
    Ok(p)
}

/// Fresh E2 plus D21/D22, copied from the trained D11/D12 when
/// `copy_decoders` is set.
pub fn init_dae(arch: &ArchConfig, seed: u64, fae: &Params, copy_decoders: bool) -> Result<Params> {
    arch.validate()?;
    let mut p = Params::new();
    init_encoder(&mut p, E2, &arch.dae_schedule, arch, seed);
    let pairs: &[(&str, &str)] = if arch.phase_aware {
        &[(D11, D21), (D12, D22)]
    } else {
        &[(D11, D21)]
    };
    for &(from, to) in pairs {
        if copy_decoders {
            let n = p.copy_prefix(fae, &format!("{from}."), &format!("{to}."));
            if n == 0 {
                return Err(Error::State(format!("FAE parameters lack decoder `{from}`")));
            }
        } else {
            init_decoder(&mut p, to, &arch.fae_schedule, arch, seed);
        }
    }
    Ok(p)
}

/// Reparameterised sample `mean + exp(log_variance / 2) * noise`.
pub fn sample_latent(graph: &mut Graph, mean: Var, log_variance: Var, noise: Tensor) -> Result<Var> {
    graph.value(mean).same_shape(graph.value(log_variance), "sample_latent")?;
    graph.value(mean).same_shape(&noise, "sample_latent noise")?;
    let half = graph.scale(log_variance, 0.5)?;
    let std = graph.exp(half)?;
    let n = graph.constant(noise);
    let scaled = graph.mul(std, n)?;
    graph.add(mean, scaled)
}

/// Plain-text description of a checkpoint's architecture.
pub fn write_model_manifest(path: &Path, arch: &ArchConfig, seed: u64, role: &str) -> Result<()> {
    let join = |s: &[usize]| s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
    let text = format!(
        "role={role}\nfae_schedule={}\ndae_schedule={}\nlatent_dim={}\nkernel={}\nstride=1\npadding={}\n\
         hidden_activation=leaky_relu({})\namplitude_activation=softplus\nphase_activation=linear\n\
         multi_resolution={}\nphase_aware={}\nsample_rate={}\nseed={seed}\n",
        join(&arch.fae_schedule),
        join(&arch.dae_schedule),
        arch.latent_dim(),
        arch.kernel,
        arch.padding(),
        arch.slope,
        arch.multi_resolution,
        arch.phase_aware,
        arch.sample_rate,
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

//! FAE and DAE training: per-item tapes, batch-averaged gradients, global
//! norm clipping and Adam, with the backward cycle switched on from the
//! second epoch.

mod ccc;
mod config;

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use ccc::{ccc_step, BcBanks, CccOutput, CccState, Nets};
pub use config::TrainConfig;

use crate::data::{load_signals, Manifest, Role, Split};
use crate::dsp::{multi_res, MultiResSpectra};
use crate::error::{Error, Result};
use crate::loss::{cycle_loss, fae_total, kl_loss, reduced_plane_loss, write_loss_csv, LossReport};
use crate::model::{
    decode, encode, init_dae, init_fae, sample_latent, write_model_manifest, ArchConfig, BankVars, Plane,
    D11, D12, D21, D22, E1, E2,
};
use crate::rng;
use crate::tensor::{adam_step, save_checkpoint, AdamState, Graph, Params, Tensor, Var};

/// Which autoencoder an epoch trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Fae,
    Dae,
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Fae => rng::label("fae"),
            Stage::Dae => rng::label("dae"),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Fae => "fae",
            Stage::Dae => "dae",
        }
    }
}

pub fn fae_nets(arch: &ArchConfig) -> Nets<'_> {
    Nets {
        encoder: E1,
        schedule: &arch.fae_schedule,
        amplitude: D11,
        phase: D12,
        decoder_schedule: &arch.fae_schedule,
    }
}

pub fn dae_nets(arch: &ArchConfig) -> Nets<'_> {
    Nets {
        encoder: E2,
        schedule: &arch.dae_schedule,
        amplitude: D21,
        phase: D22,
        decoder_schedule: &arch.fae_schedule,
    }
}

/// Multi-resolution analysis of every training signal, in order.
pub fn prepare_items(signals: &[Vec<f64>], sample_rate: u32) -> Result<Vec<MultiResSpectra>> {
    signals.par_iter().map(|s| multi_res(s, sample_rate)).collect()
}

struct ItemOutcome {
    grads: Params,
    report: LossReport,
    bc: Option<BcBanks>,
}

fn standard_normal(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::stream(seed, &[rng::label("latent-noise")]);
    Tensor::from_fn(shape, |_| StandardNormal.sample(&mut r))
}

fn item_value(g: &Graph, v: Var) -> f64 {
    g.value(v).item()
}

/// Reconstruction losses: amplitude only without phase awareness, otherwise
/// the (possibly cycle-combined) amplitude and phase terms.
struct Reconstruction {
    j_amplitude: Var,
    j_phase: Option<Var>,
    j_a2p: Option<Var>,
    j_p2a: Option<Var>,
    amplitude: Vec<Var>,
    phase: Vec<Var>,
    bc: Option<BcBanks>,
}

#[allow(clippy::too_many_arguments)]
fn reconstruct(
    g: &mut Graph,
    bound: &crate::tensor::BoundParams,
    nets: Nets<'_>,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    bank: &BankVars,
    z: Var,
    state: &CccState,
) -> Result<Reconstruction> {
    let heads = arch.n_res();
    let amplitude = decode(g, bound, nets.amplitude, nets.decoder_schedule, arch, z, Plane::Amplitude, heads)?;
    if !arch.phase_aware {
        let j_amplitude = reduced_plane_loss(g, &bank.amplitude, &amplitude, cfg.reduction)?;
        return Ok(Reconstruction {
            j_amplitude,
            j_phase: None,
            j_a2p: None,
            j_p2a: None,
            amplitude,
            phase: bank.phase.clone(),
            bc: None,
        });
    }
    let phase = decode(g, bound, nets.phase, nets.decoder_schedule, arch, z, Plane::Phase, heads)?;
    if cfg.ccc {
        let out = ccc_step(g, bound, nets, arch, bank, &amplitude, &phase, state, cfg.weights.theta1, cfg.reduction)?;
        let bc = out.detached(g);
        Ok(Reconstruction {
            j_amplitude: out.j_amplitude,
            j_phase: Some(out.j_phase),
            j_a2p: out.j_a2p,
            j_p2a: out.j_p2a,
            amplitude,
            phase,
            bc,
        })
    } else {
        let j_amplitude = reduced_plane_loss(g, &bank.amplitude, &amplitude, cfg.reduction)?;
        let j_phase = reduced_plane_loss(g, &bank.phase, &phase, cfg.reduction)?;
        Ok(Reconstruction {
            j_amplitude,
            j_phase: Some(j_phase),
            j_a2p: None,
            j_p2a: None,
            amplitude,
            phase,
            bc: None,
        })
    }
}

fn fae_item(
    params: &Params,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    spectra: &MultiResSpectra,
    state: &CccState,
    noise_seed: u64,
) -> Result<ItemOutcome> {
    let mut g = Graph::new();
    let bound = params.record(&mut g, true);
    let bank = BankVars::record(&mut g, spectra, arch.n_res());
    let nets = fae_nets(arch);
    let enc = encode(&mut g, &bound, E1, &arch.fae_schedule, arch, &bank)?;
    let noise = standard_normal(g.value(enc.mean).shape(), noise_seed);
    let z = sample_latent(&mut g, enc.mean, enc.log_variance, noise)?;
    let rec = reconstruct(&mut g, &bound, nets, arch, cfg, &bank, z, state)?;
    let j_s = match rec.j_phase {
        Some(p) => g.add(rec.j_amplitude, p)?,
        None => rec.j_amplitude,
    };
    let recon = BankVars {
        amplitude: rec.amplitude.clone(),
        phase: rec.phase.clone(),
    };
    let enc_hat = encode(&mut g, &bound, E1, &arch.fae_schedule, arch, &recon)?;
    let j_cyc = cycle_loss(&mut g, j_s, &enc.layers, &enc_hat.layers, cfg.weights.theta3)?;
    let kl = kl_loss(&mut g, enc.mean, enc.log_variance)?;
    let total = fae_total(&mut g, kl, j_s, j_cyc, cfg.weights.theta2)?;
    let grads = g.backward(total)?;
    let mut report = LossReport::new(state.epoch());
    report.set("J_Sa", item_value(&g, rec.j_amplitude));
    if let Some(p) = rec.j_phase {
        report.set("J_Sp", item_value(&g, p));
    }
    if let (Some(a2p), Some(p2a)) = (rec.j_a2p, rec.j_p2a) {
        report.set("J_a2p", item_value(&g, a2p));
        report.set("J_p2a", item_value(&g, p2a));
    }
    report.set("J_KL", item_value(&g, kl));
    report.set("J_cyc", item_value(&g, j_cyc));
    report.set("J_total", item_value(&g, total));
    Ok(ItemOutcome {
        grads: bound.gradients(&grads),
        report,
        bc: rec.bc,
    })
}

fn dae_item(
    params: &Params,
    fae: &Params,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    spectra: &MultiResSpectra,
    state: &CccState,
    noise_seed: u64,
) -> Result<ItemOutcome> {
    let mut g = Graph::new();
    let bound = params.record(&mut g, true);
    let mut all = bound.clone();
    if cfg.align_weight > 0.0 {
        all.merge(fae.subset(&format!("{E1}.")).record(&mut g, false));
    }
    let bank = BankVars::record(&mut g, spectra, arch.n_res());
    let nets = dae_nets(arch);
    let enc = encode(&mut g, &all, E2, &arch.dae_schedule, arch, &bank)?;
    let noise = standard_normal(g.value(enc.mean).shape(), noise_seed);
    let z = sample_latent(&mut g, enc.mean, enc.log_variance, noise)?;
    let rec = reconstruct(&mut g, &all, nets, arch, cfg, &bank, z, state)?;
    let kl = kl_loss(&mut g, enc.mean, enc.log_variance)?;
    let weighted_kl = g.scale(kl, cfg.weights.theta2)?;
    let mut total = g.add(weighted_kl, rec.j_amplitude)?;
    if let Some(p) = rec.j_phase {
        total = g.add(total, p)?;
    }
    let mut align = None;
    if cfg.align_weight > 0.0 {
        let reference = encode(&mut g, &all, E1, &arch.fae_schedule, arch, &bank)?;
        let d = g.squared_distance(enc.mean, reference.mean)?;
        let w = g.scale(d, cfg.align_weight)?;
        total = g.add(total, w)?;
        align = Some(d);
    }
    let grads = g.backward(total)?;
    let mut report = LossReport::new(state.epoch());
    report.set("J_Ma", item_value(&g, rec.j_amplitude));
    if let Some(p) = rec.j_phase {
        report.set("J_Mp", item_value(&g, p));
    }
    if let (Some(a2p), Some(p2a)) = (rec.j_a2p, rec.j_p2a) {
        report.set("J_a2p", item_value(&g, a2p));
        report.set("J_p2a", item_value(&g, p2a));
    }
    if let Some(a) = align {
        report.set("J_align", item_value(&g, a));
    }
    report.set("J_KL", item_value(&g, kl));
    report.set("J_total", item_value(&g, total));
    Ok(ItemOutcome {
        grads: bound.gradients(&grads),
        report,
        bc: rec.bc,
    })
}

/// Adds the parameter norm and position to numerics failures.
fn diagnose(e: Error, stage: Stage, epoch: usize, item: usize, params: &Params) -> Error {
    match e {
        Error::Numerics(msg) => Error::Numerics(format!(
            "{msg} [{} epoch {epoch}, item {item}, parameter norm {:.6e}, {} tensors]",
            stage.name(),
            params.global_norm(),
            params.len()
        )),
        other => other,
    }
}

/// Scales `grads` down to at most `max_norm`; returns the norm before scaling.
pub fn clip_global_norm(grads: &mut Params, max_norm: f64) -> Result<f64> {
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(Error::Numerics(format!("gradient norm is {norm}")));
    }
    if norm > max_norm {
        grads.scale_in_place(max_norm / norm);
    }
    Ok(norm)
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    stage: Stage,
    items: &[MultiResSpectra],
    params: &mut Params,
    fae: Option<&Params>,
    adam: &mut AdamState,
    state: &mut CccState,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<LossReport> {
    if items.is_empty() {
        return Err(Error::Data(format!("no {} training items", stage.name())));
    }
    if epoch == 0 {
        return Err(Error::State("epochs are numbered from 1".into()));
    }
    state.begin_epoch(epoch);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, &[stage.tag(), rng::label("order"), epoch as u64]));
    let mut report = LossReport::new(epoch);
    let share = 1.0 / items.len() as f64;
    for batch in order.chunks(cfg.batch) {
        let current: &Params = params;
        let outcomes: Vec<Result<ItemOutcome>> = batch
            .par_iter()
            .map(|&i| {
                let seed = rng::derive_seed(cfg.seed, &[stage.tag(), epoch as u64, i as u64]);
                let out = match stage {
                    Stage::Fae => fae_item(current, arch, cfg, &items[i], state, seed),
                    Stage::Dae => dae_item(current, fae.expect("dae epochs get fae params"), arch, cfg, &items[i], state, seed),
                };
                out.map_err(|e| diagnose(e, stage, epoch, i, current))
            })
            .collect();
        let mut acc: Option<Params> = None;
        let mut bcs = Vec::new();
        for (out, &i) in outcomes.into_iter().zip(batch) {
            let out = out?;
            match acc.as_mut() {
                None => acc = Some(out.grads),
                Some(a) => a.add_scaled(&out.grads, 1.0)?,
            }
            report.add_scaled(&out.report, share);
            if let Some(bc) = out.bc {
                bcs.push((i, bc));
            }
        }
        for (i, bc) in bcs {
            state.record(i, bc);
        }
        let mut grads = acc.expect("batches are non-empty");
        grads.scale_in_place(1.0 / batch.len() as f64);
        let norm = clip_global_norm(&mut grads, cfg.clip_norm)?;
        adam_step(params, &grads, adam)?;
        log::debug!(
            "{} epoch {epoch} step {}: gradient norm {norm:.3e}, parameter norm {:.3e}",
            stage.name(),
            adam.step_count,
            params.global_norm()
        );
    }
    report.epoch = epoch;
    Ok(report)
}

/// One pass of FAE training over `items` (epoch numbers start at 1).
#[allow(clippy::too_many_arguments)]
pub fn fae_epoch(
    items: &[MultiResSpectra],
    params: &mut Params,
    adam: &mut AdamState,
    state: &mut CccState,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<LossReport> {
    run_epoch(Stage::Fae, items, params, None, adam, state, arch, cfg, epoch)
}

/// One pass of DAE training; `fae` is read but never modified.
#[allow(clippy::too_many_arguments)]
pub fn dae_epoch(
    items: &[MultiResSpectra],
    params: &mut Params,
    fae: &Params,
    adam: &mut AdamState,
    state: &mut CccState,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<LossReport> {
    run_epoch(Stage::Dae, items, params, Some(fae), adam, state, arch, cfg, epoch)
}

/// Final parameters and one report per epoch.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: Params,
    pub reports: Vec<LossReport>,
}

fn checkpoint_due(epoch: usize, cfg: &TrainConfig) -> bool {
    epoch % cfg.checkpoint_every == 0
}

fn finish(stage: Stage, out: Option<&Path>, params: &Params, reports: &[LossReport], arch: &ArchConfig, cfg: &TrainConfig) -> Result<()> {
    if let Some(dir) = out {
        let name = stage.name();
        save_checkpoint(params, &dir.join(format!("{name}.ckpt")))?;
        write_model_manifest(&dir.join(format!("{name}.model.txt")), arch, cfg.seed, name)?;
        write_loss_csv(&dir.join(format!("{name}_loss.csv")), reports)?;
    }
    Ok(())
}

fn prepare_dir(out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Trains the FAE from a fresh initialisation. With `out`, writes periodic
/// and final checkpoints, the model sidecar and the loss CSV there.
pub fn train_fae(items: &[MultiResSpectra], arch: &ArchConfig, cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate(arch)?;
    prepare_dir(out)?;
    let mut params = init_fae(arch, rng::derive_seed(cfg.seed, &[rng::label("init-fae")]))?;
    let mut adam = AdamState::new(cfg.adam);
    let mut state = CccState::new();
    let mut reports = Vec::with_capacity(cfg.fae_epochs);
    for epoch in 1..=cfg.fae_epochs {
        let r = fae_epoch(items, &mut params, &mut adam, &mut state, arch, cfg, epoch)?;
        log::info!("fae epoch {epoch}: J_FAE {:.6e}", r.total());
        reports.push(r);
        if let (Some(dir), true) = (out, checkpoint_due(epoch, cfg)) {
            save_checkpoint(&params, &dir.join(format!("fae_epoch{epoch:04}.ckpt")))?;
        }
    }
    finish(Stage::Fae, out, &params, &reports, arch, cfg)?;
    Ok(TrainOutcome { params, reports })
}

/// Trains the DAE against a frozen FAE.
pub fn train_dae(
    items: &[MultiResSpectra],
    fae: &Params,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate(arch)?;
    for prefix in [E1, D11] {
        if !fae.names().any(|n| n.starts_with(&format!("{prefix}."))) {
            return Err(Error::State(format!("FAE checkpoint has no `{prefix}` parameters")));
        }
    }
    prepare_dir(out)?;
    let mut params = init_dae(arch, rng::derive_seed(cfg.seed, &[rng::label("init-dae")]), fae, cfg.copy_decoders)?;
    let mut adam = AdamState::new(cfg.adam);
    let mut state = CccState::new();
    let mut reports = Vec::with_capacity(cfg.dae_epochs);
    for epoch in 1..=cfg.dae_epochs {
        let r = dae_epoch(items, &mut params, fae, &mut adam, &mut state, arch, cfg, epoch)?;
        log::info!("dae epoch {epoch}: J_DAE {:.6e}", r.total());
        reports.push(r);
        if let (Some(dir), true) = (out, checkpoint_due(epoch, cfg)) {
            save_checkpoint(&params, &dir.join(format!("dae_epoch{epoch:04}.ckpt")))?;
        }
    }
    finish(Stage::Dae, out, &params, &reports, arch, cfg)?;
    Ok(TrainOutcome { params, reports })
}

/// Loads the FAE clean set and the DAE mixture set of `manifest`.
pub fn load_training_sets(manifest: &Manifest, sample_rate: u32) -> Result<(Vec<MultiResSpectra>, Vec<MultiResSpectra>)> {
    manifest.validate()?;
    let clean = manifest.select(Role::Clean, Split::Fae);
    let mixtures = manifest.select(Role::Mixture, Split::Dae);
    if clean.is_empty() || mixtures.is_empty() {
        return Err(Error::Data(format!(
            "manifest has {} fae clean and {} dae mixture entries; both are needed",
            clean.len(),
            mixtures.len()
        )));
    }
    let fae = prepare_items(&load_signals(&clean, sample_rate)?, sample_rate)?;
    let dae = prepare_items(&load_signals(&mixtures, sample_rate)?, sample_rate)?;
    Ok((fae, dae))
}

/// Both training phases on the manifest's disjoint clean and mixture sets.
pub fn train_full(manifest: &Manifest, arch: &ArchConfig, cfg: &TrainConfig, out: Option<&Path>) -> Result<(TrainOutcome, TrainOutcome)> {
    cfg.validate(arch)?;
    let (fae_items, dae_items) = load_training_sets(manifest, arch.sample_rate)?;
    let fae = train_fae(&fae_items, arch, cfg, out)?;
    let dae = train_dae(&dae_items, &fae.params, arch, cfg, out)?;
    Ok((fae, dae))
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::loss::{combined_amplitude_loss, combined_phase_loss, reduced_plane_loss, Reduction};
use crate::model::{decode, encode, ArchConfig, BankVars, Plane};
use crate::tensor::{BoundParams, Graph, Tensor, Var};

/// Encoder and decoders taking part in one autoencoder's cycle.
#[derive(Clone, Copy, Debug)]
pub struct Nets<'a> {
    pub encoder: &'a str,
    pub schedule: &'a [usize],
    pub amplitude: &'a str,
    pub phase: &'a str,
    pub decoder_schedule: &'a [usize],
}

/// Backward-cycle banks of one training item, detached from any tape.
#[derive(Clone, Debug, PartialEq)]
pub struct BcBanks {
    /// Phase decoded from the amplitude-substituted bank.
    pub phase: Vec<Tensor>,
    /// Amplitude decoded from the phase-substituted bank.
    pub amplitude: Vec<Tensor>,
}

/// Backward-cycle banks carried between epochs, keyed by item index.
#[derive(Clone, Debug, Default)]
pub struct CccState {
    epoch: usize,
    banks: BTreeMap<usize, BcBanks>,
}

impl CccState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Enters 1-based `epoch`.
    pub fn begin_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Whether the current epoch computes backward-cycle terms.
    pub fn cycles_active(&self) -> bool {
        self.epoch >= 2
    }

    pub fn record(&mut self, item: usize, banks: BcBanks) {
        self.banks.insert(item, banks);
    }

    /// Banks produced for `item` in the most recent cycling epoch.
    pub fn bc_banks(&self, item: usize) -> Result<&BcBanks> {
        if !self.cycles_active() {
            return Err(Error::State(format!(
                "backward-cycle banks do not exist in epoch {}; they start in epoch 2",
                self.epoch
            )));
        }
        self.banks
            .get(&item)
            .ok_or_else(|| Error::State(format!("no backward-cycle banks for item {item}")))
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }
}

/// Losses of one backward-cycle step.
#[derive(Clone, Debug)]
pub struct CccOutput {
    /// Amplitude loss, combined with the phase-to-amplitude term after epoch 1.
    pub j_amplitude: Var,
    /// Phase loss, combined with the amplitude-to-phase term after epoch 1.
    pub j_phase: Var,
    pub j_a2p: Option<Var>,
    pub j_p2a: Option<Var>,
    pub bc_phase: Vec<Var>,
    pub bc_amplitude: Vec<Var>,
}

impl CccOutput {
    pub fn detached(&self, graph: &Graph) -> Option<BcBanks> {
        if self.bc_phase.is_empty() {
            return None;
        }
        Some(BcBanks {
            phase: self.bc_phase.iter().map(|&v| graph.value(v).clone()).collect(),
            amplitude: self.bc_amplitude.iter().map(|&v| graph.value(v).clone()).collect(),
        })
    }
}

/// Base reconstruction losses and, from epoch 2, the backward cycles.
///
/// The amplitude-to-phase cycle re-encodes the bank with its amplitude
/// replaced by the reconstruction and decodes phase; the phase-to-amplitude
/// cycle re-encodes the bank with its phase replaced by that cycle's output
/// and decodes amplitude. The encoder mean is used, so no noise is drawn.
#[allow(clippy::too_many_arguments)]
pub fn ccc_step(
    graph: &mut Graph,
    params: &BoundParams,
    nets: Nets<'_>,
    arch: &ArchConfig,
    target: &BankVars,
    recon_amplitude: &[Var],
    recon_phase: &[Var],
    state: &CccState,
    theta1: f64,
    reduction: Reduction,
) -> Result<CccOutput> {
    if state.epoch() == 0 {
        return Err(Error::State("epochs are numbered from 1".into()));
    }
    let j_a = reduced_plane_loss(graph, &target.amplitude, recon_amplitude, reduction)?;
    let j_p = reduced_plane_loss(graph, &target.phase, recon_phase, reduction)?;
    if !state.cycles_active() {
        return Ok(CccOutput {
            j_amplitude: j_a,
            j_phase: j_p,
            j_a2p: None,
            j_p2a: None,
            bc_phase: Vec::new(),
            bc_amplitude: Vec::new(),
        });
    }
    let heads = arch.n_res();
    let a_sub = BankVars {
        amplitude: recon_amplitude.to_vec(),
        phase: target.phase.clone(),
    };
    let enc = encode(graph, params, nets.encoder, nets.schedule, arch, &a_sub)?;
    let bc_phase = decode(graph, params, nets.phase, nets.decoder_schedule, arch, enc.mean, Plane::Phase, heads)?;
    let j_a2p = reduced_plane_loss(graph, &target.phase, &bc_phase, reduction)?;
    let j_phase = combined_phase_loss(graph, j_p, j_a2p, theta1)?;
    let p_sub = BankVars {
        amplitude: target.amplitude.clone(),
        phase: bc_phase.clone(),
    };
    let enc = encode(graph, params, nets.encoder, nets.schedule, arch, &p_sub)?;
    let bc_amplitude = decode(
        graph,
        params,
        nets.amplitude,
        nets.decoder_schedule,
        arch,
        enc.mean,
        Plane::Amplitude,
        heads,
    )?;
    let j_p2a = reduced_plane_loss(graph, &target.amplitude, &bc_amplitude, reduction)?;
    let j_amplitude = combined_amplitude_loss(graph, j_a, j_p2a, theta1)?;
    Ok(CccOutput {
        j_amplitude,
        j_phase,
        j_a2p: Some(j_a2p),
        j_p2a: Some(j_p2a),
        bc_phase,
        bc_amplitude,
    })
}

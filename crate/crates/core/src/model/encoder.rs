use super::{bank_bins, ArchConfig, BankVars};
use crate::dsp::frame_offset;
use crate::error::{Error, Result};
use crate::tensor::{BoundParams, Graph, Var};

/// Unwrapped phase grows with the frame index; this keeps encoder inputs
/// of a few hundred frames in a moderate range.
pub const PHASE_INPUT_SCALE: f64 = 0.01;

/// Variational head plus the per-resolution layer activations.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub mean: Var,
    pub log_variance: Var,
    /// Output of the layer fed by each resolution; the mean when that layer
    /// is the last one.
    pub layers: Vec<Var>,
}

/// Encoder input for resolution `i`: frames centred on the base frames,
/// compressed amplitude (and scaled phase) resampled to the base bin grid.
pub fn encoder_features(graph: &mut Graph, bank: &BankVars, i: usize, arch: &ArchConfig) -> Result<Var> {
    let base_frames = graph.value(bank.amplitude[0]).dims2()?.1;
    let off = frame_offset(i);
    let mut planes = vec![(bank.amplitude[i], true)];
    if arch.phase_aware {
        planes.push((bank.phase[i], false));
    }
    let mut parts = Vec::with_capacity(planes.len());
    for (plane, is_amp) in planes {
        let (bins, frames) = graph.value(plane).dims2()?;
        if bins != bank_bins(i) || frames != base_frames + 2 * off {
            return Err(Error::Shape(format!(
                "resolution {} plane is {bins}x{frames}, expected {}x{}",
                i + 1,
                bank_bins(i),
                base_frames + 2 * off
            )));
        }
        let cropped = if off == 0 {
            plane
        } else {
            graph.slice(plane, 0, bins, off, base_frames)?
        };
        let scaled = if is_amp {
            graph.log1p(cropped)?
        } else {
            graph.scale(cropped, PHASE_INPUT_SCALE)?
        };
        parts.push(if bins == bank_bins(0) {
            scaled
        } else {
            graph.resample_rows(scaled, bank_bins(0))?
        });
    }
    if parts.len() == 1 {
        Ok(parts[0])
    } else {
        graph.concat_rows(&parts)
    }
}

fn conv(graph: &mut Graph, p: &BoundParams, name: &str, x: Var, padding: usize) -> Result<Var> {
    let w = p.var(&format!("{name}.weight"))?;
    let b = p.var(&format!("{name}.bias"))?;
    graph.conv1d(x, w, b, 1, padding)
}

/// Runs encoder `prefix` over `bank`. Resolution 1 is the first layer's
/// input; resolution `i > 1` is projected and added to layer `i`'s input.
pub fn encode(
    graph: &mut Graph,
    params: &BoundParams,
    prefix: &str,
    schedule: &[usize],
    arch: &ArchConfig,
    bank: &BankVars,
) -> Result<EncoderOutput> {
    let n_res = arch.n_res();
    if bank.amplitude.len() != n_res || bank.phase.len() != n_res {
        return Err(Error::Shape(format!(
            "encoder expects {n_res} resolutions, bank has {}",
            bank.amplitude.len()
        )));
    }
    let latent = *schedule.last().ok_or_else(|| Error::Config("empty schedule".into()))?;
    let pad = arch.padding();
    let n = schedule.len();
    let mut h = encoder_features(graph, bank, 0, arch)?;
    let mut layers = Vec::with_capacity(n_res);
    let mut head = None;
    for l in 0..n {
        if l > 0 && l < n_res {
            let feat = encoder_features(graph, bank, l, arch)?;
            let proj = conv(graph, params, &format!("{prefix}.inject{}", l + 1), feat, 0)?;
            h = graph.add(h, proj)?;
        }
        let pre = conv(graph, params, &format!("{prefix}.layer{}", l + 1), h, pad)?;
        if l + 1 == n {
            head = Some(pre);
        } else {
            h = graph.leaky_relu(pre, arch.slope)?;
            if l < n_res {
                layers.push(h);
            }
        }
    }
    let head = head.expect("schedule is non-empty");
    let frames = graph.value(head).dims2()?.1;
    let mean = graph.slice(head, 0, latent, 0, frames)?;
    let log_variance = graph.slice(head, latent, latent, 0, frames)?;
    if layers.len() < n_res {
        layers.push(mean);
    }
    Ok(EncoderOutput {
        mean,
        log_variance,
        layers,
    })
}

use super::{bank_bins, ArchConfig};
use crate::dsp::frame_offset;
use crate::error::{Error, Result};
use crate::tensor::{BoundParams, Graph, Var};

/// Which polar plane a decoder emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plane {
    /// Softplus output, non-negative.
    Amplitude,
    /// Linear output, unwrapped radians.
    Phase,
}

fn conv(graph: &mut Graph, p: &BoundParams, name: &str, x: Var, padding: usize) -> Result<Var> {
    let w = p.var(&format!("{name}.weight"))?;
    let b = p.var(&format!("{name}.bias"))?;
    graph.conv1d(x, w, b, 1, padding)
}

/// Decodes `z` into the planes of the first `heads` resolutions.
///
/// Head `i` pads by the resolution's frame offset so its output has as
/// many frames as that resolution's analysis of the same signal.
pub fn decode(
    graph: &mut Graph,
    params: &BoundParams,
    prefix: &str,
    schedule: &[usize],
    arch: &ArchConfig,
    z: Var,
    plane: Plane,
    heads: usize,
) -> Result<Vec<Var>> {
    let rev: Vec<usize> = schedule.iter().rev().copied().collect();
    let (channels, _) = graph.value(z).dims2()?;
    if channels != rev[0] {
        return Err(Error::Shape(format!(
            "decoder `{prefix}` expects {} latent channels, got {channels}",
            rev[0]
        )));
    }
    if heads == 0 || heads > arch.n_res() {
        return Err(Error::Shape(format!(
            "decoder has {} heads, {heads} requested",
            arch.n_res()
        )));
    }
    let pad = arch.padding();
    let mut h = z;
    for j in 1..rev.len() {
        let pre = conv(graph, params, &format!("{prefix}.trunk{j}"), h, pad)?;
        h = graph.leaky_relu(pre, arch.slope)?;
    }
    let mut out = Vec::with_capacity(heads);
    for i in 0..heads {
        if i > 0 {
            let pre = conv(graph, params, &format!("{prefix}.stage{}", i + 1), h, pad)?;
            h = graph.leaky_relu(pre, arch.slope)?;
        }
        let y = conv(graph, params, &format!("{prefix}.head{}", i + 1), h, pad + frame_offset(i))?;
        debug_assert_eq!(graph.value(y).shape()[0], bank_bins(i));
        out.push(match plane {
            Plane::Amplitude => graph.softplus(y)?,
            Plane::Phase => y,
        });
    }
    Ok(out)
}

use super::{decode, encode, ArchConfig, BankVars, Plane, D11, D12, E2};
use crate::dsp::{istft, multi_res, polar_recompose, wrap_phase, PolarSpectrogram, BANK_HOP, BANK_WINDOWS};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Params};

/// Zeros added before the mixture and the total padded length.
///
/// Every original sample ends up under a full stack of base-resolution
/// frames; near an unpadded edge the overlap-add divides a decoded (hence
/// inconsistent) spectrogram by window sums close to zero.
pub fn enhancement_padding(len: usize) -> (usize, usize) {
    let lead = BANK_WINDOWS[0] - BANK_HOP;
    let body = lead + len + lead;
    let extra = (BANK_HOP - (body - BANK_WINDOWS[0]) % BANK_HOP) % BANK_HOP;
    (lead, body + extra)
}

/// Enhances `mixture` with the DAE encoder and the FAE decoders.
///
/// The latent is the encoder mean, so the output is a deterministic
/// function of the parameters and the input. Without phase awareness the
/// mixture's own phase is reused.
pub fn enhance(mixture: &[f64], arch: &ArchConfig, fae: &Params, dae: &Params) -> Result<Vec<f64>> {
    arch.validate()?;
    if mixture.len() < BANK_WINDOWS[0] {
        return Err(Error::Input(format!(
            "mixture of {} samples is shorter than {}",
            mixture.len(),
            BANK_WINDOWS[0]
        )));
    }
    let (lead, total) = enhancement_padding(mixture.len());
    let mut padded = vec![0.0; total];
    padded[lead..lead + mixture.len()].copy_from_slice(mixture);
    let spectra = multi_res(&padded, arch.sample_rate)?;
    let mut g = Graph::new();
    let mut bound = dae.subset(&format!("{E2}.")).record(&mut g, false);
    if bound_is_empty(dae, E2) {
        return Err(Error::State("DAE checkpoint has no encoder parameters".into()));
    }
    bound.merge(fae.subset(&format!("{D11}.")).record(&mut g, false));
    if arch.phase_aware {
        bound.merge(fae.subset(&format!("{D12}.")).record(&mut g, false));
    }
    let bank = BankVars::record(&mut g, &spectra, arch.n_res());
    let enc = encode(&mut g, &bound, E2, &arch.dae_schedule, arch, &bank)?;
    let amp = decode(&mut g, &bound, D11, &arch.fae_schedule, arch, enc.mean, Plane::Amplitude, 1)?[0];
    let base = &spectra.bank()[0];
    let phase = if arch.phase_aware {
        let p = decode(&mut g, &bound, D12, &arch.fae_schedule, arch, enc.mean, Plane::Phase, 1)?[0];
        wrap_phase(g.value(p))
    } else {
        wrap_phase(&base.phase)
    };
    let polar = PolarSpectrogram {
        amplitude: g.value(amp).clone(),
        phase,
        geometry: base.geometry,
    };
    let full = istft(&polar_recompose(&polar)?, total)?;
    let out = full[lead..lead + mixture.len()].to_vec();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerics("enhanced signal is not finite".into()));
    }
    Ok(out)
}

fn bound_is_empty(p: &Params, prefix: &str) -> bool {
    !p.names().any(|n| n.starts_with(&format!("{prefix}.")))
}

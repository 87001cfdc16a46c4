//! SDR, SI-SDR and log-spectral distance, and evaluation over the test split.

mod metrics;
mod report;

use rayon::prelude::*;

pub use metrics::{lsd, sdr, si_sdr, LSD_EPSILON, METRIC_CAP_DB};
pub use report::{MetricCell, MetricReport, MetricRow};

use crate::data::{load_signals, Manifest, ManifestEntry, Role, Split};
use crate::error::{Error, Result};
use crate::model::{enhance, ArchConfig};
use crate::tensor::Params;

/// Anything that maps a mixture to an estimate of the same length.
pub trait Enhancer: Sync {
    fn enhance(&self, mixture: &[f64]) -> Result<Vec<f64>>;
}

/// Returns the mixture unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct Passthrough;

impl Enhancer for Passthrough {
    fn enhance(&self, mixture: &[f64]) -> Result<Vec<f64>> {
        Ok(mixture.to_vec())
    }
}

/// The trained DAE encoder with the FAE decoders.
#[derive(Clone, Debug)]
pub struct ModelEnhancer {
    pub arch: ArchConfig,
    pub fae: Params,
    pub dae: Params,
}

impl Enhancer for ModelEnhancer {
    fn enhance(&self, mixture: &[f64]) -> Result<Vec<f64>> {
        enhance(mixture, &self.arch, &self.fae, &self.dae)
    }
}

fn mixture_meta(e: &ManifestEntry) -> Result<(f64, String)> {
    match (e.snr_db, &e.noise_kind) {
        (Some(snr), Some(kind)) => Ok((snr, kind.clone())),
        _ => Err(Error::Data(format!("test mixture {} lacks snr or noise kind", e.id))),
    }
}

/// Enhances every test mixture of `manifest` and scores it against its
/// clean source.
pub fn evaluate_set(manifest: &Manifest, enhancer: &dyn Enhancer, sample_rate: u32) -> Result<MetricReport> {
    manifest.validate()?;
    let mixtures = manifest.select(Role::Mixture, Split::Test);
    if mixtures.is_empty() {
        return Err(Error::Data("manifest has no test mixtures".into()));
    }
    let mut references = Vec::with_capacity(mixtures.len());
    for m in &mixtures {
        let src = m.source_id();
        let clean = manifest
            .find(src)
            .filter(|e| e.role == Role::Clean && e.split == Split::Test)
            .ok_or_else(|| Error::Data(format!("test mixture {} has no clean test source `{src}`", m.id)))?;
        references.push(clean);
    }
    let all: Vec<&ManifestEntry> = mixtures.iter().chain(&references).copied().collect();
    let mut audio = load_signals(&all, sample_rate)?;
    let clean = audio.split_off(mixtures.len());
    let rows = mixtures
        .par_iter()
        .zip(audio.par_iter().zip(clean.par_iter()))
        .map(|(m, (mix, reference))| {
            let (snr_db, noise_kind) = mixture_meta(m)?;
            if mix.len() != reference.len() {
                return Err(Error::Data(format!("{} and its clean source differ in length", m.id)));
            }
            let est = enhancer.enhance(mix)?;
            if est.len() != mix.len() {
                return Err(Error::Shape(format!("enhancer returned {} samples for {}", est.len(), mix.len())));
            }
            Ok(MetricRow {
                id: m.id.clone(),
                snr_db,
                noise_kind,
                sdr_db: sdr(reference, &est)?,
                si_sdr_db: si_sdr(reference, &est)?,
                lsd_db: lsd(reference, &est)?,
                input_sdr_db: sdr(reference, mix)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_rows(rows))
}

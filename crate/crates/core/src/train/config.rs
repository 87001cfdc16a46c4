use crate::error::{Error, Result};
use crate::loss::{LossWeights, Reduction};
use crate::model::ArchConfig;
use crate::tensor::AdamConfig;

/// Optimisation schedule and loss settings for both training phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch: usize,
    pub fae_epochs: usize,
    pub dae_epochs: usize,
    pub weights: LossWeights,
    /// Reduction of the spectral reconstruction and backward-cycle planes.
    pub reduction: Reduction,
    pub seed: u64,
    /// Backward-cycle terms; needs a phase-aware model.
    pub ccc: bool,
    pub clip_norm: f64,
    pub checkpoint_every: usize,
    /// Start D21/D22 from the trained D11/D12.
    pub copy_decoders: bool,
    /// Weight of `‖mean(E2(M)) − mean(E1(M))‖²` in the DAE loss.
    pub align_weight: f64,
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            fae_epochs: 30,
            dae_epochs: 30,
            // A literal sum over ~10^4-element phase planes diverges within
            // the few Adam steps a desk run takes.
            reduction: Reduction::Mean,
            ..Self::paper()
        }
    }

    pub fn paper() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch: 20,
            fae_epochs: 700,
            dae_epochs: 1500,
            weights: LossWeights::default(),
            reduction: Reduction::Sum,
            seed: 0,
            ccc: true,
            clip_norm: 5.0,
            checkpoint_every: 50,
            copy_decoders: true,
            align_weight: 0.0,
        }
    }

    pub fn validate(&self, arch: &ArchConfig) -> Result<()> {
        self.adam.validate()?;
        self.weights.validate()?;
        arch.validate()?;
        if self.batch == 0 || self.fae_epochs == 0 || self.dae_epochs == 0 {
            return Err(Error::Config("batch and epoch counts must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config(format!("clip norm {} must be positive", self.clip_norm)));
        }
        if !(self.align_weight >= 0.0 && self.align_weight.is_finite()) {
            return Err(Error::Config("alignment weight must be finite and non-negative".into()));
        }
        if self.ccc && !arch.phase_aware {
            return Err(Error::Config(
                "the backward cycle maps between amplitude and phase, so ccc needs phase_aware".into(),
            ));
        }
        Ok(())
    }
}

//! Generator and discriminator networks, plus checkpoint persistence.
//!
//! The generator is an encoder-decoder with a skip connection between every
//! pair of symmetric levels and no bottleneck layer. The discriminator is a
//! three-level convolutional encoder followed by a patch head whose
//! per-patch probabilities are averaged.

mod checkpoint;
mod discriminator;
mod generator;
pub mod layers;
mod tensor;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, Phase, TrainingMeta};
pub use discriminator::{mean_probability, DiscCache, DiscOutput, Discriminator};
pub use generator::{masked_values, GeneratedPair, Generator, GeneratorCache};
pub use tensor::Tensor;

/// Lower/upper bound applied to every probability before a logarithm.
pub const PROB_EPS: f64 = 1e-7;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Uniform access to the learnable tensors of a network, in a fixed order.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn tensor_names(&self) -> Vec<String>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Layer widths and the piece size the networks are built for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub piece_size: usize,
    /// Output channels of each encoder level; the decoder mirrors them.
    pub generator_channels: Vec<usize>,
    /// Output channels of each stride-2 discriminator level.
    pub discriminator_channels: Vec<usize>,
}

impl Architecture {
    /// Six generator levels (64 → 512 channels) and three discriminator
    /// levels (64, 128, 256), sized for 64-pixel pieces.
    pub fn standard() -> Self {
        Self {
            piece_size: 64,
            generator_channels: vec![64, 128, 256, 512, 512, 512],
            discriminator_channels: vec![64, 128, 256],
        }
    }

    /// Standard depth with every level `width` channels wide.
    pub fn uniform(piece_size: usize, width: usize) -> Self {
        Self {
            piece_size,
            generator_channels: vec![width; 6],
            discriminator_channels: vec![width; 3],
        }
    }

    /// Standard depth with all widths divided by `factor`.
    pub fn reduced(factor: usize) -> Self {
        let mut a = Self::standard();
        for c in a.generator_channels.iter_mut().chain(a.discriminator_channels.iter_mut()) {
            *c = (*c / factor).max(1);
        }
        a
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.generator_channels.len();
        if levels == 0 || self.generator_channels.contains(&0) || self.discriminator_channels.contains(&0) {
            return Err(Error::invalid("architecture has an empty level"));
        }
        if !self.piece_size.is_multiple_of(1 << levels) {
            return Err(Error::invalid(format!(
                "piece size {} is not divisible by 2^{levels}",
                self.piece_size
            )));
        }
        let disc_levels = self.discriminator_channels.len();
        if !self.piece_size.is_multiple_of(1 << disc_levels) || self.piece_size >> disc_levels < 3 {
            return Err(Error::invalid(format!(
                "piece size {} too small for {disc_levels} discriminator levels",
                self.piece_size
            )));
        }
        Ok(())
    }

    /// Side of the discriminator's square patch map (6 for 64-pixel pieces).
    pub fn patch_grid(&self) -> usize {
        (self.piece_size >> self.discriminator_channels.len()) - 2
    }

    pub fn descriptor(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        format!(
            "pm1-unet-k4s2-lrelu-relu-sigmoid:s{}:g{}|pm1-patch-k4s2-k3:d{}",
            self.piece_size,
            join(&self.generator_channels),
            join(&self.discriminator_channels)
        )
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.descriptor().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

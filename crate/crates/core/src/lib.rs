//! Reconstruction of square-piece jigsaw puzzles whose piece boundaries
//! have been eroded.
//!
//! The pipeline fills the gap between every candidate pair of pieces with a
//! learned inpainting generator, asks a patch discriminator how plausible
//! the filled pair looks, turns that probability into a dissimilarity and
//! hands the resulting tensor to a greedy placer.
//!
//! * [`puzzle`] slices, erodes, shuffles, persists and renders puzzles.
//! * [`pairgen`] builds the joined two-piece images fed to the networks.
//! * [`netcore`] holds the generator and discriminator.
//! * [`trainer`] runs the inpainting and classification training phases.
//! * [`scorer`] produces dissimilarity tensors (neural, baseline, oracle).
//! * [`placer`] assembles a board from a dissimilarity tensor.
//! * [`metrics`] computes the neighbor, direct and perfect measures.

pub mod cli;
pub mod error;
mod kvfile;
pub mod metrics;
pub mod netcore;
pub mod pairgen;
pub mod placer;
pub mod puzzle;
pub mod scorer;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

/// Version string embedded in every artifact this crate writes.
pub const TOOL_VERSION: &str = concat!("gapfill ", env!("CARGO_PKG_VERSION"));

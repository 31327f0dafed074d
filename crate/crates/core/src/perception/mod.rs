//! From camera frames to latent vectors.
//!
//! A per-pixel Gaussian background model strips the static part of the scene
//! and a [`LatentEncoder`] compresses what is left into a short vector.

mod background;
mod encoder;

pub use background::{BackgroundModel, BackgroundParams};
pub use encoder::{EncoderFit, LinearEncoder};

use crate::error::Result;
use crate::image::Image;

/// Encoded observation. Values are kept at `f32` precision, the precision of
/// the on-disk experience log.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent(pub Vec<f32>);

impl Latent {
    pub fn zeros(len: usize) -> Self {
        Latent(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    /// Sum of absolute coordinate differences.
    pub fn manhattan(&self, other: &Latent) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .sum()
    }

    /// Bitwise key for exact-equality lookups.
    pub fn key(&self) -> Vec<u32> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

/// Maps a foreground image to a latent vector.
///
/// The linear encoder is the stock implementation; anything that can be
/// fingerprinted and produces fixed-length vectors can take its place.
pub trait LatentEncoder {
    fn latent_dim(&self) -> usize;

    fn encode(&self, image: &Image) -> Result<Latent>;

    /// Stable identifier of the fitted parameters.
    fn fingerprint(&self) -> u64;
}

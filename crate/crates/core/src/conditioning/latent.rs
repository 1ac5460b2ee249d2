//! Deterministic latent stand-in: 8x8 spatial and 4x temporal average
//! pooling of RGB in `[0, 1]`, then a fixed 3 to 16 channel lift.

use super::{ConditioningError, LatentTensor, Result};
use crate::media::FrameSequence;

pub const SPATIAL_FACTOR: usize = 8;
pub const TEMPORAL_FACTOR: usize = 4;
pub const LATENT_CHANNELS: usize = 16;

/// Channel `k` is colour `k % 3` scaled by `1 / (1 + k / 3)` (integer
/// division), so channels 0..3 hold the pooled RGB unchanged.
pub fn lift(rgb: [f64; 3]) -> [f64; LATENT_CHANNELS] {
    std::array::from_fn(|k| rgb[k % 3] / (1 + k / 3) as f64)
}

/// Pooled RGB per cell, read back from channels 0..3, as a `(w, h, t, 3)` tensor.
pub fn unlift(latent: &LatentTensor) -> Result<LatentTensor> {
    let (w, h, t, c) = latent.shape();
    if c != LATENT_CHANNELS {
        return Err(ConditioningError::Shape(format!("unlift needs {LATENT_CHANNELS} channels, got {c}")));
    }
    let data = latent.data().chunks_exact(c).flat_map(|cell| cell[..3].to_vec()).collect();
    LatentTensor::new(w, h, t, 3, data)
}

fn divisible(axis: &'static str, size: usize, multiple: usize) -> Result<()> {
    if size == 0 || !size.is_multiple_of(multiple) {
        let padded = size.div_ceil(multiple).max(1) * multiple;
        return Err(ConditioningError::Indivisible {
            axis,
            size,
            multiple,
            pad: padded - size,
            padded,
        });
    }
    Ok(())
}

/// Encode float frames, each `width * height * 3` interleaved RGB values.
pub fn encode_latent_rgb(width: usize, height: usize, frames: &[Vec<f64>]) -> Result<LatentTensor> {
    divisible("width", width, SPATIAL_FACTOR)?;
    divisible("height", height, SPATIAL_FACTOR)?;
    divisible("frame count", frames.len(), TEMPORAL_FACTOR)?;
    if let Some(bad) = frames.iter().position(|f| f.len() != width * height * 3) {
        return Err(ConditioningError::Shape(format!(
            "frame {bad} has {} values, expected {}",
            frames[bad].len(),
            width * height * 3
        )));
    }
    let (w, h, t) = (width / SPATIAL_FACTOR, height / SPATIAL_FACTOR, frames.len() / TEMPORAL_FACTOR);
    let count = (SPATIAL_FACTOR * SPATIAL_FACTOR * TEMPORAL_FACTOR) as f64;
    let mut sums = vec![[0.0f64; 3]; w * h * t];
    for (f, frame) in frames.iter().enumerate() {
        for y in 0..height {
            for x in 0..width {
                let cell = &mut sums[((f / TEMPORAL_FACTOR) * h + y / SPATIAL_FACTOR) * w + x / SPATIAL_FACTOR];
                let p = (y * width + x) * 3;
                for ch in 0..3 {
                    cell[ch] += frame[p + ch];
                }
            }
        }
    }
    let data = sums
        .iter()
        .flat_map(|s| lift([s[0] / count, s[1] / count, s[2] / count]))
        .collect();
    LatentTensor::new(w, h, t, LATENT_CHANNELS, data)
}

/// Encode 8-bit video with colours scaled to `[0, 1]`.
pub fn encode_latent_stub(seq: &FrameSequence) -> Result<LatentTensor> {
    let frames: Vec<Vec<f64>> = seq
        .frames()
        .iter()
        .map(|f| f.pixels().iter().map(|&v| f64::from(v) / 255.0).collect())
        .collect();
    encode_latent_rgb(seq.width(), seq.height(), &frames)
}

//! Deterministic in-process stand-ins for every provider role.
//!
//! Image features are 64-bin HSV histograms; video features append a
//! two-component motion code so that appearance and speed live in disjoint
//! coordinates; text features are signed feature hashes of lowercase tokens.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CaptionRequest, Embedding, ModelProvider, ProviderError, Result};
use crate::analysis::{aesthetic_ref_score, flow_score, rgb_to_hsv255, AestheticParams, FlowParams};
use crate::evalkit::reference_smoothness;
use crate::media::{connected_components, sample_frames, BinaryMask, Frame, FrameSequence};

const HUE_BINS: usize = 8;
const SAT_BINS: usize = 2;
const VAL_BINS: usize = 4;
pub const IMAGE_BINS: usize = HUE_BINS * SAT_BINS * VAL_BINS;
/// Video and text embeddings: the image histogram plus `[cos, sin]` of the motion angle.
pub const VIDEO_DIM: usize = IMAGE_BINS + 2;
/// Length of the motion code relative to the unit appearance histogram.
const MOTION_WEIGHT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceParams {
    pub flow: FlowParams,
    pub aesthetic: AestheticParams,
    /// Flow score (px/s) mapped to the fully "moving" end of the motion code.
    pub flow_norm: f64,
    /// Frames averaged into a video embedding.
    pub video_frames: usize,
    /// Euclidean RGB distance from the border mean above which a pixel is foreground.
    pub mask_distance: f64,
    pub mask_min_area: usize,
    /// Mean block residual mapped to smoothness 0.
    pub smoothness_norm: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            flow: FlowParams::default(),
            aesthetic: AestheticParams::default(),
            flow_norm: 96.0,
            video_frames: 8,
            mask_distance: 40.0,
            mask_min_area: 16,
            smoothness_norm: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReferenceProvider {
    params: ReferenceParams,
}

impl ReferenceProvider {
    pub fn new(params: ReferenceParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &ReferenceParams {
        &self.params
    }

    fn histogram(frame: &Frame) -> Vec<f64> {
        let mut bins = vec![0.0; IMAGE_BINS];
        for rgb in frame.rgb_pixels() {
            let [h, s, v] = rgb_to_hsv255(rgb);
            let hb = ((h / 255.0 * HUE_BINS as f64) as usize).min(HUE_BINS - 1);
            let sb = ((s / 256.0 * SAT_BINS as f64) as usize).min(SAT_BINS - 1);
            let vb = ((v / 256.0 * VAL_BINS as f64) as usize).min(VAL_BINS - 1);
            bins[(hb * SAT_BINS + sb) * VAL_BINS + vb] += 1.0;
        }
        bins
    }

    /// Motion angle in `[0, pi/2]`: 0 for a still clip, pi/2 at or above `flow_norm`.
    pub fn motion_angle(&self, seq: &FrameSequence) -> Result<f64> {
        if seq.len() < 2 {
            return Ok(0.0);
        }
        let flow = flow_score(seq, &self.params.flow).map_err(|e| ProviderError::Invalid(e.to_string()))?;
        Ok((flow / self.params.flow_norm).clamp(0.0, 1.0) * std::f64::consts::FRAC_PI_2)
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl ModelProvider for ReferenceProvider {
    fn name(&self) -> String {
        "ref".into()
    }

    fn embed_image(&self, frame: &Frame) -> Result<Embedding> {
        Embedding::normalized(Self::histogram(frame))
    }

    fn embed_video(&self, seq: &FrameSequence) -> Result<Embedding> {
        let picks = sample_frames(seq.len(), self.params.video_frames.max(1))
            .map_err(|e| ProviderError::Invalid(e.to_string()))?;
        let mut mean = vec![0.0; IMAGE_BINS];
        for &i in &picks {
            let e = self.embed_image(seq.frame(i))?;
            for (m, v) in mean.iter_mut().zip(e.values()) {
                *m += v / picks.len() as f64;
            }
        }
        let appearance = Embedding::normalized(mean)?;
        let theta = self.motion_angle(seq)?;
        let mut values: Vec<f64> = appearance.values().to_vec();
        values.push(MOTION_WEIGHT * theta.cos());
        values.push(MOTION_WEIGHT * theta.sin());
        Embedding::normalized(values)
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let mut values = vec![0.0; VIDEO_DIM];
        let mut any = false;
        for token in tokens(text) {
            any = true;
            let digest = Sha256::digest(token.as_bytes());
            let mut idx = [0u8; 8];
            idx.copy_from_slice(&digest[..8]);
            let slot = (u64::from_le_bytes(idx) % VIDEO_DIM as u64) as usize;
            values[slot] += if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        }
        if !any {
            return Err(ProviderError::Invalid("text has no tokens".into()));
        }
        if values.iter().all(|&v| v == 0.0) {
            // colliding tokens cancelled out; fall back to a one-hot of the whole text
            let digest = Sha256::digest(text.to_lowercase().as_bytes());
            values[digest[0] as usize % VIDEO_DIM] = 1.0;
        }
        Embedding::normalized(values)
    }

    fn caption(&self, request: &CaptionRequest) -> Result<String> {
        Ok(match request.hint.as_deref().map(str::trim) {
            Some(hint) if !hint.is_empty() => hint.to_string(),
            _ => format!("clip {} from {}", request.id, request.source),
        })
    }

    fn char_masks(&self, frame: &Frame) -> Result<Vec<BinaryMask>> {
        let (w, h) = frame.dims();
        let mut border = [0.0f64; 3];
        let mut n = 0.0;
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    let p = frame.pixel(x, y);
                    for c in 0..3 {
                        border[c] += f64::from(p[c]);
                    }
                    n += 1.0;
                }
            }
        }
        let border = border.map(|s| s / n);
        let threshold = self.params.mask_distance;
        let fg = BinaryMask::from_fn(w, h, |x, y| {
            let p = frame.pixel(x, y);
            let d2: f64 = (0..3).map(|c| (f64::from(p[c]) - border[c]).powi(2)).sum();
            d2.sqrt() > threshold
        });
        Ok(connected_components(&fg)
            .into_iter()
            .filter(|r| r.pixel_count >= self.params.mask_min_area)
            .map(|r| r.to_mask(w, h))
            .collect())
    }

    fn score_smoothness(&self, seq: &FrameSequence) -> Result<f64> {
        reference_smoothness(seq, &self.params.flow, self.params.smoothness_norm)
            .map_err(|e| ProviderError::Invalid(e.to_string()))
    }

    fn score_aesthetic(&self, _embedding: &Embedding, frame: &Frame) -> Result<f64> {
        Ok(aesthetic_ref_score(frame, &self.params.aesthetic) / 10.0)
    }

    fn score_regression(&self, a: &Embedding, b: &Embedding) -> Result<f64> {
        Ok(((a.cosine(b)? + 1.0) / 2.0).clamp(0.0, 1.0))
    }
}

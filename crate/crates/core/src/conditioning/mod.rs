//! Conditioning data for guided video generation: stub latents, guide and
//! mask sequences, channel assembly, diffusion schedule algebra, unmask
//! plans and motion-area masks.
//!
//! Tensors are stored channel-last with time outermost: element
//! `(x, y, t, ch)` lives at `((t * h + y) * w + x) * c + ch`.

mod bundle;
mod guide;
mod latent;
mod motion;
mod schedule;
mod unmask;

use thiserror::Error;

pub use bundle::{assemble_condition_input, BundleSidecar, ChannelLayout, ChannelSpan, ConditionBundle, Part};
pub use guide::{build_guide, reproject_mask, Guide, GuidePlan};
pub use latent::{
    encode_latent_rgb, encode_latent_stub, lift, unlift, LATENT_CHANNELS, SPATIAL_FACTOR, TEMPORAL_FACTOR,
};
pub use motion::{clamp_static_latent, track_foreground, union_masks};
pub use schedule::{noisy_latent, recover_eps, recover_x0, v_target, ScheduleParams};
pub use unmask::{sample_unmask_plan, unmask_candidates};

use crate::analysis::AnalysisError;
use crate::media::{BinaryMask, MediaError};

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("{axis} of {size} is not a multiple of {multiple}; pad by {pad} to {padded}")]
    Indivisible {
        axis: &'static str,
        size: usize,
        multiple: usize,
        pad: usize,
        padded: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("guide position {position} is outside 0..{n}")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("guide position {0} appears more than once")]
    DuplicatePosition(usize),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("timestep {t} is outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("unmask plan needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("tensor value at index {0} is not finite")]
    NonFinite(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type Result<T, E = ConditioningError> = std::result::Result<T, E>;

/// Dense `(w, h, t, c)` float tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTensor {
    w: usize,
    h: usize,
    t: usize,
    c: usize,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(w: usize, h: usize, t: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if w * h * t * c == 0 {
            return Err(ConditioningError::Shape(format!("zero-sized tensor ({w}, {h}, {t}, {c})")));
        }
        if data.len() != w * h * t * c {
            return Err(ConditioningError::Shape(format!(
                "({w}, {h}, {t}, {c}) needs {} values, got {}",
                w * h * t * c,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ConditioningError::NonFinite(i));
        }
        Ok(Self { w, h, t, c, data })
    }

    pub fn zeros(w: usize, h: usize, t: usize, c: usize) -> Self {
        assert!(w * h * t * c > 0, "zero-sized tensor");
        Self {
            w,
            h,
            t,
            c,
            data: vec![0.0; w * h * t * c],
        }
    }

    /// Standard normal samples from a seeded generator.
    pub fn gaussian(w: usize, h: usize, t: usize, c: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self::zeros(w, h, t, c);
        for v in &mut out.data {
            *v = rng.sample(rand_distr::StandardNormal);
        }
        out
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.w, self.h, self.t, self.c)
    }

    /// `(w, h, t)` without channels.
    pub fn grid(&self) -> (usize, usize, usize) {
        (self.w, self.h, self.t)
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn index(&self, x: usize, y: usize, t: usize, ch: usize) -> usize {
        debug_assert!(x < self.w && y < self.h && t < self.t && ch < self.c);
        ((t * self.h + y) * self.w + x) * self.c + ch
    }

    pub fn get(&self, x: usize, y: usize, t: usize, ch: usize) -> f64 {
        self.data[self.index(x, y, t, ch)]
    }

    pub fn set(&mut self, x: usize, y: usize, t: usize, ch: usize, value: f64) {
        let i = self.index(x, y, t, ch);
        self.data[i] = value;
    }

    /// All channels of one cell.
    pub fn cell(&self, x: usize, y: usize, t: usize) -> &[f64] {
        let i = self.index(x, y, t, 0);
        &self.data[i..i + self.c]
    }

    pub fn cell_mut(&mut self, x: usize, y: usize, t: usize) -> &mut [f64] {
        let i = self.index(x, y, t, 0);
        &mut self.data[i..i + self.c]
    }

    /// Latent frame `t` as a `(w, h, 1, c)` tensor.
    pub fn frame(&self, t: usize) -> LatentTensor {
        let n = self.w * self.h * self.c;
        LatentTensor {
            w: self.w,
            h: self.h,
            t: 1,
            c: self.c,
            data: self.data[t * n..(t + 1) * n].to_vec(),
        }
    }

    pub fn frame_abs_sum(&self, t: usize) -> f64 {
        let n = self.w * self.h * self.c;
        self.data[t * n..(t + 1) * n].iter().map(|v| v.abs()).sum()
    }

    pub(crate) fn same_shape(&self, other: &LatentTensor, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(ConditioningError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub(crate) fn zip_map(&self, other: &LatentTensor, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<LatentTensor> {
        self.same_shape(other, what)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(LatentTensor { data, ..*self })
    }
}

/// Binary mask over `(width, height, frames)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskVolume {
    width: usize,
    height: usize,
    frames: usize,
    bits: Vec<bool>,
}

impl MaskVolume {
    pub fn new(width: usize, height: usize, frames: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height * frames {
            return Err(ConditioningError::Shape(format!(
                "mask ({width}, {height}, {frames}) needs {} bits, got {}",
                width * height * frames,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            bits: vec![false; width * height * frames],
        }
    }

    pub fn ones(width: usize, height: usize, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            bits: vec![true; width * height * frames],
        }
    }

    /// `mask` repeated over `frames` frames.
    pub fn repeat(mask: &BinaryMask, frames: usize) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            frames,
            bits: mask.bits().repeat(frames),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frames)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> bool {
        self.bits[(t * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, t: usize, value: bool) {
        self.bits[(t * self.height + y) * self.width + x] = value;
    }

    pub fn frame(&self, t: usize) -> BinaryMask {
        let n = self.width * self.height;
        BinaryMask::new(self.width, self.height, self.bits[t * n..(t + 1) * n].to_vec()).expect("slice has w*h bits")
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// One-channel 0/1 tensor.
    pub fn to_tensor(&self) -> LatentTensor {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        LatentTensor::new(self.width, self.height, self.frames, 1, data).expect("mask volume is non-empty")
    }
}

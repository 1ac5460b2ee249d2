//! Classical scoring kernels for clip filtering: scene cuts, block flow,
//! overlay-text coverage, an aesthetic composite and motion-amplitude classes.
//!
//! Every numeric parameter lives in [`AnalysisConfig`] and is loaded from the
//! pipeline config file.

mod aesthetic;
mod color;
mod flow;
mod scene;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aesthetic::{aesthetic_parts, aesthetic_ref_score, AestheticParams, AestheticParts};
pub use color::{rgb_to_hsv255, HsvFrame};
pub use flow::{
    block_flow, block_flow_luma, flow_score, sampled_flows, sampled_pairs, FlowField, FlowParams,
};
pub use scene::{
    consecutive_deltas, content_delta, cuts_to_ranges, detect_cuts, detect_scenes, SceneCut,
    SceneParams,
};
pub use text::{otsu_threshold, text_cover_score, TextParams};

use crate::media::FrameSequence;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("frame dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("flow undefined: clip needs at least 2 frames")]
    FlowUndefined,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

/// Flow-score breakpoints (px/s) separating the six motion degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionClassParams {
    pub breakpoints: [f64; 5],
}

impl Default for MotionClassParams {
    fn default() -> Self {
        Self {
            breakpoints: [1.0, 8.0, 24.0, 48.0, 96.0],
        }
    }
}

impl MotionClassParams {
    pub fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if !(b[0] > 0.0) || b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AnalysisError::InvalidParam(format!(
                "motion breakpoints must be positive and strictly increasing, got {b:?}"
            )));
        }
        Ok(())
    }

    /// Degree 1 (still) to 6 for a flow score in px/s.
    pub fn degree(&self, flow: f64) -> u8 {
        1 + self.breakpoints.iter().filter(|&&b| flow > b).count() as u8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub scene: SceneParams,
    pub flow: FlowParams,
    pub text: TextParams,
    pub aesthetic: AestheticParams,
    pub motion: MotionClassParams,
    /// Frames sampled per clip for text and aesthetic scoring.
    pub score_frames: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            flow: FlowParams::default(),
            text: TextParams::default(),
            aesthetic: AestheticParams::default(),
            motion: MotionClassParams::default(),
            score_frames: 8,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        self.aesthetic.validate()?;
        self.motion.validate()?;
        if !(self.scene.threshold > 0.0) || self.scene.min_scene_len == 0 {
            return Err(AnalysisError::InvalidParam(
                "scene threshold must be > 0 and min_scene_len >= 1".into(),
            ));
        }
        if self.score_frames == 0 {
            return Err(AnalysisError::InvalidParam("score_frames must be >= 1".into()));
        }
        if !(self.text.band_fraction > 0.0 && self.text.band_fraction <= 1.0) {
            return Err(AnalysisError::InvalidParam("text band_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Motion amplitude degree in `1..=6` for a clip.
pub fn motion_class(seq: &FrameSequence, flow: &FlowParams, classes: &MotionClassParams) -> Result<u8> {
    Ok(classes.degree(flow_score(seq, flow)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Fps, Frame};
    use crate::synth;

    #[test]
    fn still_clip_is_degree_one() {
        let seq = FrameSequence::still(synth::noise_frame(16, 16, 1), 4, Fps::integer(8).unwrap(), "s").unwrap();
        assert_eq!(
            motion_class(&seq, &FlowParams::default(), &MotionClassParams::default()).unwrap(),
            1
        );
    }

    #[test]
    fn fast_clip_is_degree_six() {
        // 7 px/frame at 24 fps, sampled every 3rd frame, still exceeds 96 px/s
        let seq = synth::translating_noise(48, 32, 7, (7, 0), 24, 2);
        let params = FlowParams {
            radius: 21,
            ..Default::default()
        };
        assert_eq!(motion_class(&seq, &params, &MotionClassParams::default()).unwrap(), 6);
    }

    #[test]
    fn degree_is_monotone_in_velocity() {
        let classes = MotionClassParams::default();
        let mut last = 0;
        for v in 0..=7 {
            let seq = synth::translating_noise(40, 24, 4, (v, 0), 8, 5);
            let d = motion_class(&seq, &FlowParams::default(), &classes).unwrap();
            assert!(d >= last, "v={v}: {d} < {last}");
            last = d;
        }
        let mut prev = 0;
        for i in 0..2000 {
            let d = classes.degree(i as f64 * 0.1);
            assert!(d >= prev && (1..=6).contains(&d));
            prev = d;
        }
    }

    #[test]
    fn one_frame_propagates_flow_error() {
        let seq = FrameSequence::still(Frame::filled(8, 8, [0; 3]).unwrap(), 1, Fps::integer(8).unwrap(), "s").unwrap();
        assert!(motion_class(&seq, &FlowParams::default(), &MotionClassParams::default()).is_err());
    }

    #[test]
    fn breakpoints_validated() {
        let bad = MotionClassParams {
            breakpoints: [1.0, 1.0, 2.0, 3.0, 4.0],
        };
        assert!(bad.validate().is_err());
    }
}

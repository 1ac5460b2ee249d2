//! Content-delta scene cut detection.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::color::HsvFrame;
use super::{AnalysisError, Result};
use crate::media::{Frame, FrameSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneCut {
    /// First frame of the new scene.
    pub frame_index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub threshold: f64,
    pub min_scene_len: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            threshold: 27.0,
            min_scene_len: 15,
        }
    }
}

fn hsv_delta(a: &HsvFrame, b: &HsvFrame) -> f64 {
    let sum: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(p, q)| ((p[0] - q[0]).abs() + (p[1] - q[1]).abs() + (p[2] - q[2]).abs()) / 3.0)
        .sum();
    sum / a.pixels.len() as f64
}

/// Mean over pixels of the average absolute H, S, V difference, on a 0..=255 scale.
pub fn content_delta(a: &Frame, b: &Frame) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(AnalysisError::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(hsv_delta(&HsvFrame::new(a), &HsvFrame::new(b)))
}

/// `deltas[i]` is the content delta between frames `i` and `i + 1`.
pub fn consecutive_deltas(seq: &FrameSequence) -> Vec<f64> {
    let hsv: Vec<HsvFrame> = seq.frames().iter().map(HsvFrame::new).collect();
    hsv.windows(2).map(|w| hsv_delta(&w[0], &w[1])).collect()
}

/// Cut positions: frame `i` opens a new scene when its delta from frame
/// `i - 1` exceeds `threshold` and at least `min_scene_len` frames have
/// passed since the previous cut (or the start).
pub fn detect_cuts(seq: &FrameSequence, params: &SceneParams) -> Result<Vec<SceneCut>> {
    if params.threshold <= 0.0 || !params.threshold.is_finite() {
        return Err(AnalysisError::InvalidParam(format!(
            "scene threshold must be > 0, got {}",
            params.threshold
        )));
    }
    if params.min_scene_len == 0 {
        return Err(AnalysisError::InvalidParam("min_scene_len must be >= 1".into()));
    }
    let mut cuts = Vec::new();
    let mut previous = 0usize;
    for (k, delta) in consecutive_deltas(seq).into_iter().enumerate() {
        let i = k + 1;
        if delta > params.threshold && i - previous >= params.min_scene_len {
            cuts.push(SceneCut {
                frame_index: i,
                score: delta,
            });
            previous = i;
        }
    }
    Ok(cuts)
}

/// Split `seq` into clips that tile `[0, len)` exactly.
pub fn detect_scenes(seq: &FrameSequence, params: &SceneParams) -> Result<Vec<Range<usize>>> {
    let cuts = detect_cuts(seq, params)?;
    Ok(cuts_to_ranges(&cuts, seq.len()))
}

pub fn cuts_to_ranges(cuts: &[SceneCut], len: usize) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for cut in cuts {
        out.push(start..cut.frame_index);
        start = cut.frame_index;
    }
    out.push(start..len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Fps;
    use crate::synth;

    #[test]
    fn identical_frames_have_zero_delta() {
        let f = synth::noise_frame(16, 16, 3);
        assert_eq!(content_delta(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn black_white_delta_is_a_third_of_full_scale() {
        let black = Frame::filled(4, 4, [0; 3]).unwrap();
        let white = Frame::filled(4, 4, [255; 3]).unwrap();
        assert!((content_delta(&black, &white).unwrap() - 85.0).abs() < 1e-9);
    }

    #[test]
    fn delta_is_symmetric() {
        let a = synth::noise_frame(12, 10, 1);
        let b = synth::noise_frame(12, 10, 2);
        assert_eq!(content_delta(&a, &b).unwrap(), content_delta(&b, &a).unwrap());
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Frame::filled(4, 4, [0; 3]).unwrap();
        let b = Frame::filled(4, 5, [0; 3]).unwrap();
        assert!(content_delta(&a, &b).is_err());
    }

    #[test]
    fn red_to_blue_cut_at_thirty() {
        let seq = synth::color_cuts(32, 32, 60, &[0, 30], &[[255, 0, 0], [0, 0, 255]], 25);
        let scenes = detect_scenes(&seq, &SceneParams::default()).unwrap();
        assert_eq!(scenes, vec![0..30, 30..60]);
    }

    #[test]
    fn constant_video_is_one_clip() {
        let f = Frame::filled(8, 8, [40, 90, 200]).unwrap();
        let seq = FrameSequence::still(f, 45, Fps::integer(24).unwrap(), "c").unwrap();
        assert_eq!(detect_scenes(&seq, &SceneParams::default()).unwrap(), vec![0..45]);
    }

    #[test]
    fn short_scene_is_suppressed() {
        let seq = synth::color_cuts(8, 8, 10, &[0, 2], &[[255, 0, 0], [0, 0, 255]], 25);
        let params = SceneParams {
            threshold: 27.0,
            min_scene_len: 4,
        };
        assert_eq!(detect_scenes(&seq, &params).unwrap(), vec![0..10]);
    }

    #[test]
    fn rejects_bad_params() {
        let seq = synth::color_cuts(8, 8, 4, &[0], &[[1, 2, 3]], 25);
        let bad = SceneParams {
            threshold: 0.0,
            min_scene_len: 1,
        };
        assert!(detect_scenes(&seq, &bad).is_err());
    }
}

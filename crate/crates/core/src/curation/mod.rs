//! Clip scoring, the four-dimension filter rule, retention calibration,
//! score histograms and caption manifests.

mod calibrate;
mod histogram;
mod manifest;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{calibrate, quantile, synthetic_scores, Calibration};
pub use histogram::{histogram_report, write_histogram_csv, HistogramRow};
pub use manifest::{
    build_manifest, caption_request, finish_manifest, passing_records, read_manifest, ManifestEntry, ManifestOutcome,
};

use crate::analysis::{aesthetic_ref_score, flow_score, text_cover_score, AnalysisConfig, AnalysisError};
use crate::media::{sample_frames, Fps, FrameSequence};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("clip {clip}: missing {dimension} score")]
    MissingScore { clip: String, dimension: Dimension },
    #[error("invalid filter rule: {0}")]
    InvalidRule(String),
    #[error("calibration needs at least {min} clips, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("retention target {target} is outside (0, 1)")]
    InvalidTarget { target: f64 },
    #[error("retention target {target} is unreachable: duration bounds alone retain {max:.6}; achievable range is [{min:.6}, {max:.6}]")]
    Unreachable { target: f64, min: f64, max: f64 },
    #[error("calibration reached retention {achieved:.6}, not within 10% of target {target}")]
    CalibrationMiss { target: f64, achieved: f64 },
    #[error("histogram needs at least one record and one bin")]
    EmptyHistogram,
    #[error("caption provider failed on {failed} of {attempted} clips (more than 10%)")]
    TooManyCaptionFailures { failed: usize, attempted: usize },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CurationError> = std::result::Result<T, E>;

/// Filter dimensions, in verdict-reason order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Aesthetic,
    Duration,
    Flow,
    TextCover,
}

impl Dimension {
    pub fn key(self) -> &'static str {
        match self {
            Dimension::Aesthetic => "aesthetic",
            Dimension::Duration => "duration",
            Dimension::Flow => "flow",
            Dimension::TextCover => "text_cover",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipScores {
    /// Fraction of the inspected band covered by overlay text, `[0, 1]`.
    pub text_cover: Option<f64>,
    /// Mean motion in pixels per second; absent for single-frame clips.
    pub flow: Option<f64>,
    /// Aesthetic composite, `[0, 10]`.
    pub aesthetic: Option<f64>,
    pub duration: f64,
    pub frame_count: usize,
}

/// Inclusive thresholds on the four dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterRule {
    pub text_cover_max: f64,
    pub flow_min: f64,
    pub flow_max: f64,
    pub aesthetic_min: f64,
    pub duration_min: f64,
    pub duration_max: f64,
}

pub const DURATION_MIN: f64 = 2.0;
pub const DURATION_MAX: f64 = 20.0;

impl Default for FilterRule {
    fn default() -> Self {
        Self {
            text_cover_max: 0.02,
            flow_min: 1.0,
            flow_max: 200.0,
            aesthetic_min: 3.0,
            duration_min: DURATION_MIN,
            duration_max: DURATION_MAX,
        }
    }
}

impl FilterRule {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.text_cover_max,
            self.flow_min,
            self.flow_max,
            self.aesthetic_min,
            self.duration_min,
            self.duration_max,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(CurationError::InvalidRule("thresholds must be finite".into()));
        }
        if !(self.flow_min < self.flow_max) {
            return Err(CurationError::InvalidRule(format!(
                "flow_min {} must be below flow_max {}",
                self.flow_min, self.flow_max
            )));
        }
        if !(self.duration_min < self.duration_max) {
            return Err(CurationError::InvalidRule(format!(
                "duration_min {} must be below duration_max {}",
                self.duration_min, self.duration_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Failed dimensions, sorted.
    pub reasons: Vec<Dimension>,
}

fn require(score: Option<f64>, clip: &str, dimension: Dimension) -> Result<f64> {
    score.ok_or_else(|| CurationError::MissingScore {
        clip: clip.to_string(),
        dimension,
    })
}

/// Judge one clip. `clip` only labels errors.
pub fn apply_filter(clip: &str, scores: &ClipScores, rule: &FilterRule) -> Result<Verdict> {
    let aesthetic = require(scores.aesthetic, clip, Dimension::Aesthetic)?;
    let flow = require(scores.flow, clip, Dimension::Flow)?;
    let text_cover = require(scores.text_cover, clip, Dimension::TextCover)?;
    let mut reasons = Vec::new();
    if aesthetic < rule.aesthetic_min {
        reasons.push(Dimension::Aesthetic);
    }
    if !(rule.duration_min..=rule.duration_max).contains(&scores.duration) {
        reasons.push(Dimension::Duration);
    }
    if !(rule.flow_min..=rule.flow_max).contains(&flow) {
        reasons.push(Dimension::Flow);
    }
    if text_cover > rule.text_cover_max {
        reasons.push(Dimension::TextCover);
    }
    Ok(Verdict {
        pass: reasons.is_empty(),
        reasons,
    })
}

/// A clip cut from a source video, with its scores and, once judged, a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub id: String,
    pub source: String,
    pub frame_start: usize,
    pub frame_end: usize,
    pub fps: Fps,
    pub scores: ClipScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

/// Score one clip: text cover and aesthetics averaged over
/// `config.score_frames` evenly spaced frames, flow over the whole clip.
pub fn score_clip(seq: &FrameSequence, config: &AnalysisConfig) -> Result<ClipScores> {
    let picks = sample_frames(seq.len(), config.score_frames).expect("score_frames validated >= 1");
    let n = picks.len() as f64;
    let text_cover = picks
        .iter()
        .map(|&i| text_cover_score(seq.frame(i), &config.text))
        .sum::<f64>()
        / n;
    let aesthetic = picks
        .iter()
        .map(|&i| aesthetic_ref_score(seq.frame(i), &config.aesthetic))
        .sum::<f64>()
        / n;
    let flow = match flow_score(seq, &config.flow) {
        Ok(f) => Some(f),
        Err(AnalysisError::FlowUndefined) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(ClipScores {
        text_cover: Some(text_cover),
        flow,
        aesthetic: Some(aesthetic),
        duration: seq.duration_seconds(),
        frame_count: seq.len(),
    })
}

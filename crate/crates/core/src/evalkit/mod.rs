//! Benchmark schema and the evaluation metrics: visual smoothness, motion,
//! appeal, text-video, image-video and character consistency, plus
//! motion-mask precision and saliency boxes.
//!
//! Every metric is a thin formula over provider outputs and returns a value
//! in `[0, 1]`; scaling to 0..100 happens in the report stage.

mod benchmark;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmark::{load_benchmark, parse_benchmark, Benchmark, BenchmarkEntry, CharacterRef, GuideFrame, Style};

use crate::analysis::{block_flow_luma, consecutive_deltas, AnalysisError, FlowParams};
use crate::media::{
    connected_components, sample_frames, to_luma, BinaryMask, BoundingBox, Frame, FrameSequence, LumaPlane,
    MediaError,
};
use crate::providers::{Embedding, ModelProvider, ProviderError};

pub const MOVING_PROMPT: &str =
    "The protagonist has a large range of movement, such as running, jumping, dancing, or waving arms.";
pub const STILL_PROMPT: &str = "The protagonist remains stationary in the video with no apparent movement.";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error("character store is empty")]
    EmptyStore,
    #[error("benchmark: {0}")]
    Benchmark(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Keyframes scored for visual appeal.
    pub keyframes: usize,
    /// Frames sampled for character consistency.
    pub character_frames: usize,
    pub flow: FlowParams,
    /// Mean warp residual mapped to smoothness 0 by the reference scorer.
    pub smoothness_norm: f64,
    /// Block motion (px per frame) above which a block counts as moving.
    pub motion_threshold: f64,
    pub saliency_min_area: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            keyframes: 5,
            character_frames: 8,
            flow: FlowParams::default(),
            smoothness_norm: 0.1,
            motion_threshold: 0.5,
            saliency_min_area: 16,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        if self.keyframes == 0 || self.character_frames == 0 {
            return Err(EvalError::InvalidParam("keyframes and character_frames must be >= 1".into()));
        }
        if !(self.smoothness_norm > 0.0) || !(self.motion_threshold >= 0.0) {
            return Err(EvalError::InvalidParam(
                "smoothness_norm must be > 0 and motion_threshold >= 0".into(),
            ));
        }
        self.flow.validate()?;
        Ok(())
    }
}

/// The six benchmark dimensions in report column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Smoothness,
    Motion,
    Appeal,
    TextVideo,
    ImageVideo,
    Character,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Smoothness,
        Metric::Motion,
        Metric::Appeal,
        Metric::TextVideo,
        Metric::ImageVideo,
        Metric::Character,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Smoothness => "smoothness",
            Metric::Motion => "motion",
            Metric::Appeal => "appeal",
            Metric::TextVideo => "text_video",
            Metric::ImageVideo => "image_video",
            Metric::Character => "character",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricOutcome {
    Ok { value: f64 },
    Failed { reason: String },
    NotApplicable,
}

impl MetricOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricOutcome::Ok { value } => Some(*value),
            _ => None,
        }
    }

    pub fn from_result<E: std::fmt::Display>(r: std::result::Result<f64, E>) -> Self {
        match r {
            Ok(value) => MetricOutcome::Ok { value },
            Err(e) => MetricOutcome::Failed { reason: e.to_string() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub smoothness: MetricOutcome,
    pub motion: MetricOutcome,
    pub appeal: MetricOutcome,
    pub text_video: MetricOutcome,
    pub image_video: MetricOutcome,
    pub character: MetricOutcome,
}

impl MetricVector {
    pub fn get(&self, metric: Metric) -> &MetricOutcome {
        match metric {
            Metric::Smoothness => &self.smoothness,
            Metric::Motion => &self.motion,
            Metric::Appeal => &self.appeal,
            Metric::TextVideo => &self.text_video,
            Metric::ImageVideo => &self.image_video,
            Metric::Character => &self.character,
        }
    }

    /// Every metric set to `Ok { value }`.
    pub fn uniform(value: f64) -> Self {
        let ok = MetricOutcome::Ok { value };
        Self {
            smoothness: ok.clone(),
            motion: ok.clone(),
            appeal: ok.clone(),
            text_video: ok.clone(),
            image_video: ok.clone(),
            character: ok,
        }
    }
}

/// Softmax (temperature 1) over the moving and still prompt cosines.
/// Returns `(moving, still)`; the two sum to 1.
pub fn motion_softmax(cos_moving: f64, cos_still: f64) -> (f64, f64) {
    let moving = 1.0 / (1.0 + (cos_still - cos_moving).exp());
    (moving, 1.0 - moving)
}

pub fn motion_probabilities(seq: &FrameSequence, provider: &dyn ModelProvider) -> Result<(f64, f64)> {
    let video = provider.embed_video(seq)?;
    let moving = provider.embed_text(MOVING_PROMPT)?;
    let still = provider.embed_text(STILL_PROMPT)?;
    Ok(motion_softmax(video.cosine(&moving)?, video.cosine(&still)?))
}

/// Probability that the clip matches the moving prompt rather than the still one.
pub fn motion_score(seq: &FrameSequence, provider: &dyn ModelProvider) -> Result<f64> {
    Ok(motion_probabilities(seq, provider)?.0)
}

/// `k` keyframe indices, ascending: frames opening the largest content
/// changes, with peaks closer than `round(fps / 2)` frames to a stronger one
/// suppressed, padded with evenly spaced frames when there are too few.
pub fn extract_keyframes(seq: &FrameSequence, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(EvalError::InvalidParam("keyframe count must be >= 1".into()));
    }
    let window = (seq.fps().as_f64() / 2.0).round().max(1.0) as usize;
    let mut peaks: Vec<(usize, f64)> = consecutive_deltas(seq)
        .into_iter()
        .enumerate()
        .filter(|&(_, d)| d > 0.0)
        .map(|(i, d)| (i + 1, d))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    for (i, _) in peaks {
        if picked.len() == k {
            break;
        }
        if picked.iter().all(|&p| p.abs_diff(i) > window) {
            picked.push(i);
        }
    }
    let fill = sample_frames(seq.len(), k)?.into_iter().chain(0..seq.len());
    for i in fill {
        if picked.len() >= k.min(seq.len()) {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Mean aesthetic head over `k` keyframe image embeddings, clamped to `[0, 1]`.
pub fn appeal_score(seq: &FrameSequence, provider: &dyn ModelProvider, k: usize) -> Result<f64> {
    let frames = extract_keyframes(seq, k)?;
    let mut total = 0.0;
    for &i in &frames {
        let frame = seq.frame(i);
        let embedding = provider.embed_image(frame)?;
        total += provider.score_aesthetic(&embedding, frame)?;
    }
    Ok((total / frames.len() as f64).clamp(0.0, 1.0))
}

/// Regression head over the video and prompt embeddings.
pub fn text_video_consistency(
    seq: &FrameSequence,
    prompt: &str,
    encoder: &dyn ModelProvider,
    head: &dyn ModelProvider,
) -> Result<f64> {
    let video = encoder.embed_video(seq)?;
    let text = encoder.embed_text(prompt)?;
    Ok(head.score_regression(&video, &text)?.clamp(0.0, 1.0))
}

/// Regression head over the video embedding and the guide image encoded as a one-frame video.
pub fn image_video_consistency(
    seq: &FrameSequence,
    guide: &Frame,
    encoder: &dyn ModelProvider,
    head: &dyn ModelProvider,
) -> Result<f64> {
    let video = encoder.embed_video(seq)?;
    let still = FrameSequence::still(guide.clone(), 1, seq.fps(), "guide")?;
    let image = encoder.embed_video(&still)?;
    Ok(head.score_regression(&video, &image)?.clamp(0.0, 1.0))
}

/// Stored character features keyed by character id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharacterStore {
    characters: BTreeMap<String, Vec<Embedding>>,
}

impl CharacterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, character: impl Into<String>, embedding: Embedding) {
        self.characters.entry(character.into()).or_default().push(embedding);
    }

    pub fn is_empty(&self) -> bool {
        self.characters.values().all(Vec::is_empty)
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn contains(&self, character: &str) -> bool {
        self.characters.contains_key(character)
    }

    pub fn embeddings(&self) -> impl Iterator<Item = &Embedding> {
        self.characters.values().flatten()
    }

    /// The store restricted to `ids`; unknown ids are ignored.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> CharacterStore {
        let mut out = CharacterStore::new();
        for id in ids {
            if let Some(v) = self.characters.get(id) {
                out.characters.insert(id.to_string(), v.clone());
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| EvalError::Benchmark(format!("{}: {e}", path.display())))
    }
}

/// Masked crop of `frame` to the bounding box of `mask`.
fn crop_to_mask(frame: &Frame, mask: &BinaryMask) -> Result<Option<Frame>> {
    match mask.bounding_box() {
        Some(bbox) => Ok(Some(frame.masked_crop(mask, bbox)?)),
        None => Ok(None),
    }
}

/// Feature of each reference image's largest character mask (the whole
/// image when no mask is found).
pub fn build_character_store<'a>(
    references: impl IntoIterator<Item = (&'a str, &'a Frame)>,
    provider: &dyn ModelProvider,
) -> Result<CharacterStore> {
    let mut store = CharacterStore::new();
    for (character, frame) in references {
        let masks = provider.char_masks(frame)?;
        let largest = masks.iter().max_by_key(|m| m.count_ones());
        let crop = match largest {
            Some(m) => crop_to_mask(frame, m)?.unwrap_or_else(|| frame.clone()),
            None => frame.clone(),
        };
        store.insert(character, provider.embed_image(&crop)?);
    }
    Ok(store)
}

/// Mean over `s` sampled frames of the best non-negative cosine between any
/// character mask's crop feature and any stored feature; frames without a
/// mask score 0.
pub fn character_consistency(
    seq: &FrameSequence,
    store: &CharacterStore,
    provider: &dyn ModelProvider,
    s: usize,
) -> Result<f64> {
    if store.is_empty() {
        return Err(EvalError::EmptyStore);
    }
    let frames = sample_frames(seq.len(), s)?;
    let mut total = 0.0;
    for &i in &frames {
        let frame = seq.frame(i);
        let mut best = 0.0f64;
        for mask in provider.char_masks(frame)? {
            let Some(crop) = crop_to_mask(frame, &mask)? else { continue };
            let feature = provider.embed_image(&crop)?;
            for stored in store.embeddings() {
                best = best.max(feature.cosine(stored)?.max(0.0));
            }
        }
        total += best;
    }
    Ok(total / frames.len() as f64)
}

/// Mean best-match block residual between consecutive frames.
fn warp_residual(seq: &FrameSequence, flow: &FlowParams) -> Result<f64> {
    if seq.len() < 2 {
        return Err(AnalysisError::FlowUndefined.into());
    }
    let luma: Vec<LumaPlane> = seq.frames().iter().map(to_luma).collect();
    let mut total = 0.0;
    for w in luma.windows(2) {
        total += block_flow_luma(&w[0], &w[1], flow)?.mean_cost();
    }
    Ok(total / (luma.len() - 1) as f64)
}

/// `1 - clamp(residual / norm)` where the residual is the mean absolute luma
/// error left after motion-compensating each frame onto the next.
pub fn reference_smoothness(seq: &FrameSequence, flow: &FlowParams, norm: f64) -> Result<f64> {
    Ok(1.0 - (warp_residual(seq, flow)? / norm).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SmoothnessSource {
    Provider,
    Reference,
    /// The provider failed and the reference scorer was used instead.
    Fallback { reason: String },
}

/// Provider smoothness when one is configured, otherwise (or on provider
/// failure) the reference scorer.
pub fn smoothness_score(
    seq: &FrameSequence,
    provider: Option<&dyn ModelProvider>,
    flow: &FlowParams,
    norm: f64,
) -> Result<(f64, SmoothnessSource)> {
    if let Some(p) = provider {
        match p.score_smoothness(seq) {
            Ok(s) => return Ok((s.clamp(0.0, 1.0), SmoothnessSource::Provider)),
            Err(e) => {
                log::warn!("smoothness provider {} failed, using reference scorer: {e}", p.name());
                let s = reference_smoothness(seq, flow, norm)?;
                return Ok((s, SmoothnessSource::Fallback { reason: e.to_string() }));
            }
        }
    }
    Ok((reference_smoothness(seq, flow, norm)?, SmoothnessSource::Reference))
}

/// Fraction of moving blocks, over all consecutive frame pairs, whose centre
/// lies inside `mask`. A clip without motion scores 1.
pub fn motion_mask_precision(seq: &FrameSequence, mask: &BinaryMask, flow: &FlowParams, threshold: f64) -> Result<f64> {
    mask.check_dims(seq.width(), seq.height())?;
    if seq.len() < 2 {
        return Err(AnalysisError::FlowUndefined.into());
    }
    let luma: Vec<LumaPlane> = seq.frames().iter().map(to_luma).collect();
    let (mut inside, mut moving) = (0usize, 0usize);
    for w in luma.windows(2) {
        let field = block_flow_luma(&w[0], &w[1], flow)?;
        for (i, magnitude) in field.magnitudes().enumerate() {
            if magnitude > threshold {
                moving += 1;
                let (cx, cy) = field.block_center(i);
                if mask.get(cx, cy) {
                    inside += 1;
                }
            }
        }
    }
    Ok(if moving == 0 {
        1.0
    } else {
        inside as f64 / moving as f64
    })
}

/// One box per connected component of the union of the provider's masks.
pub fn saliency_boxes(frame: &Frame, provider: &dyn ModelProvider, min_area: usize) -> Result<Vec<BoundingBox>> {
    let mut union = BinaryMask::empty(frame.width(), frame.height());
    for mask in provider.char_masks(frame)? {
        union = union.union(&mask)?;
    }
    Ok(connected_components(&union)
        .into_iter()
        .filter(|r| r.pixel_count >= min_area)
        .map(|r| r.bbox)
        .collect())
}

/// Inputs for scoring one generated clip against one benchmark entry.
pub struct SampleInputs<'a> {
    pub video: &'a FrameSequence,
    pub prompt: &'a str,
    pub guide: &'a Frame,
    /// `None` when the entry has no character references.
    pub characters: Option<&'a CharacterStore>,
}

/// Provider assignment per role.
#[derive(Clone, Copy)]
pub struct EvalProviders<'a> {
    /// Video and text encoder for motion, text-video and image-video scores.
    pub encoder: &'a dyn ModelProvider,
    /// Image encoder and aesthetic head.
    pub image: &'a dyn ModelProvider,
    /// Consistency regression head.
    pub regression: &'a dyn ModelProvider,
    /// Character masks and character features.
    pub character: &'a dyn ModelProvider,
    pub smoothness: Option<&'a dyn ModelProvider>,
}

/// All six metrics for one sample; failures are recorded per metric.
/// Returns the vector and any notes on where each value came from.
pub fn evaluate_sample(inputs: &SampleInputs, providers: &EvalProviders, params: &EvalParams) -> (MetricVector, Vec<String>) {
    let mut notes = Vec::new();
    let smoothness = match smoothness_score(inputs.video, providers.smoothness, &params.flow, params.smoothness_norm) {
        Ok((value, source)) => {
            if let SmoothnessSource::Fallback { reason } = source {
                notes.push(format!("smoothness: reference fallback after provider error: {reason}"));
            }
            MetricOutcome::Ok { value }
        }
        Err(e) => MetricOutcome::Failed { reason: e.to_string() },
    };
    let character = match inputs.characters {
        None => MetricOutcome::NotApplicable,
        Some(store) => MetricOutcome::from_result(character_consistency(
            inputs.video,
            store,
            providers.character,
            params.character_frames,
        )),
    };
    let vector = MetricVector {
        smoothness,
        motion: MetricOutcome::from_result(motion_score(inputs.video, providers.encoder)),
        appeal: MetricOutcome::from_result(appeal_score(inputs.video, providers.image, params.keyframes)),
        text_video: MetricOutcome::from_result(text_video_consistency(
            inputs.video,
            inputs.prompt,
            providers.encoder,
            providers.regression,
        )),
        image_video: MetricOutcome::from_result(image_video_consistency(
            inputs.video,
            inputs.guide,
            providers.encoder,
            providers.regression,
        )),
        character,
    };
    (vector, notes)
}

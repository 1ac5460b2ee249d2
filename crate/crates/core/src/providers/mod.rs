//! The boundary for every learned model role: captioning, video/text/image
//! embedding, character segmentation and the scalar regression heads.
//!
//! [`ModelProvider`] is implemented in-process by [`ReferenceProvider`] and
//! out-of-process by [`RemoteProvider`], which speaks the line-delimited JSON
//! protocol in [`wire`] to a subprocess or TCP peer.

mod reference;
mod remote;
pub mod wire;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reference::{ReferenceParams, ReferenceProvider, IMAGE_BINS, VIDEO_DIM};
pub use remote::{Endpoint, RemoteOptions, RemoteProvider};

use crate::media::{BinaryMask, Fps, Frame, FrameSequence};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider timed out after {0:?}")]
    Timeout(Duration),
    #[error("provider transport failed: {0}")]
    Transport(String),
    #[error("provider protocol violation: {0}")]
    Protocol(String),
    #[error("provider reported: {0}")]
    Remote(String),
    #[error("operation `{0}` is not supported by this provider")]
    Unsupported(String),
    #[error("invalid provider input: {0}")]
    Invalid(String),
}

impl ProviderError {
    /// Timeouts and broken connections may succeed on a fresh connection.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Timeout(_) | ProviderError::Transport(_))
    }

    /// Stable class name used in machine-readable error output.
    pub fn class(&self) -> &'static str {
        match self {
            ProviderError::Timeout(_) => "timeout",
            ProviderError::Transport(_) => "transport",
            ProviderError::Protocol(_) => "protocol",
            ProviderError::Remote(_) => "remote",
            ProviderError::Unsupported(_) => "unsupported",
            ProviderError::Invalid(_) => "invalid",
        }
    }
}

pub type Result<T, E = ProviderError> = std::result::Result<T, E>;

/// A unit-norm feature vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// L2-normalise `values`; fails on empty, non-finite or all-zero input.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Invalid("embedding must be non-empty and finite".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(ProviderError::Invalid("embedding has zero norm".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity in `[-1, 1]`.
    pub fn cosine(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(ProviderError::Invalid(format!(
                "embedding dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(dot.clamp(-1.0, 1.0))
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Embedding::normalized(values).map_err(serde::de::Error::custom)
    }
}

/// Identifies the clip a caption is requested for. `hint` carries any
/// caption already attached upstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub id: String,
    pub source: String,
    pub frame_start: usize,
    pub frame_end: usize,
    pub fps: Fps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

/// One learned-model backend. Every method is callable concurrently.
pub trait ModelProvider: Send + Sync {
    fn name(&self) -> String;
    fn embed_video(&self, seq: &FrameSequence) -> Result<Embedding>;
    fn embed_text(&self, text: &str) -> Result<Embedding>;
    fn embed_image(&self, frame: &Frame) -> Result<Embedding>;
    fn caption(&self, request: &CaptionRequest) -> Result<String>;
    fn char_masks(&self, frame: &Frame) -> Result<Vec<BinaryMask>>;
    /// Smoothness in `[0, 1]`, 1 meaning free of temporal artefacts.
    fn score_smoothness(&self, seq: &FrameSequence) -> Result<f64>;
    /// Aesthetic head in `[0, 1]` over an image embedding and its source image.
    fn score_aesthetic(&self, embedding: &Embedding, frame: &Frame) -> Result<f64>;
    /// Consistency head in `[0, 1]` over an embedding pair.
    fn score_regression(&self, a: &Embedding, b: &Embedding) -> Result<f64>;
}

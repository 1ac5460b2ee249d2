//! Channel-wise assembly of the generator input and its on-disk form.

use serde::{Deserialize, Serialize};

use super::{ConditioningError, LatentTensor, MaskVolume, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpan {
    pub offset: usize,
    pub count: usize,
}

/// Channel spans in the fixed order noise, mask, guide, text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub noise: ChannelSpan,
    pub mask: ChannelSpan,
    pub guide: ChannelSpan,
    pub text: ChannelSpan,
}

impl ChannelLayout {
    pub fn total(&self) -> usize {
        self.text.offset + self.text.count
    }

    pub fn span(&self, part: Part) -> ChannelSpan {
        match part {
            Part::Noise => self.noise,
            Part::Mask => self.mask,
            Part::Guide => self.guide,
            Part::Text => self.text,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Noise,
    Mask,
    Guide,
    Text,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionBundle {
    pub x: LatentTensor,
    pub layout: ChannelLayout,
}

/// Concatenate `[noise, mask, guide, text]` along channels. The text
/// embedding is repeated at every cell.
pub fn assemble_condition_input(
    noise: &LatentTensor,
    mask: &MaskVolume,
    guide: &LatentTensor,
    text: &[f64],
) -> Result<ConditionBundle> {
    let grid = noise.grid();
    if guide.grid() != grid || mask.dims() != grid {
        return Err(ConditioningError::Shape(format!(
            "noise grid {grid:?}, mask {:?}, guide {:?}",
            mask.dims(),
            guide.grid()
        )));
    }
    if text.is_empty() {
        return Err(ConditioningError::Shape("text embedding is empty".into()));
    }
    let mut at = 0;
    let mut span = |count| {
        let s = ChannelSpan { offset: at, count };
        at += count;
        s
    };
    let layout = ChannelLayout {
        noise: span(noise.channels()),
        mask: span(1),
        guide: span(guide.channels()),
        text: span(text.len()),
    };
    let (w, h, t) = grid;
    let mut data = Vec::with_capacity(w * h * t * layout.total());
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(noise.cell(x, y, f));
                data.push(if mask.get(x, y, f) { 1.0 } else { 0.0 });
                data.extend_from_slice(guide.cell(x, y, f));
                data.extend_from_slice(text);
            }
        }
    }
    Ok(ConditionBundle {
        x: LatentTensor::new(w, h, t, layout.total(), data)?,
        layout,
    })
}

/// JSON sidecar describing the raw tensor file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSidecar {
    /// Always `"float32"`.
    pub dtype: String,
    /// Always `"little"`.
    pub byte_order: String,
    /// Axis order from outermost to innermost; always `["t", "y", "x", "c"]`.
    pub axes: Vec<String>,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub channels: usize,
    pub layout: ChannelLayout,
}

impl ConditionBundle {
    /// Channels of one part as a standalone tensor.
    pub fn slice(&self, part: Part) -> LatentTensor {
        let span = self.layout.span(part);
        let (w, h, t, c) = self.x.shape();
        let data = self
            .x
            .data()
            .chunks_exact(c)
            .flat_map(|cell| cell[span.offset..span.offset + span.count].iter().copied())
            .collect();
        LatentTensor::new(w, h, t, span.count, data).expect("slice of a valid tensor")
    }

    pub fn mask(&self) -> MaskVolume {
        let m = self.slice(Part::Mask);
        let (w, h, t, _) = m.shape();
        MaskVolume::new(w, h, t, m.data().iter().map(|&v| v > 0.5).collect()).expect("one bit per cell")
    }

    pub fn sidecar(&self) -> BundleSidecar {
        let (w, h, t, c) = self.x.shape();
        BundleSidecar {
            dtype: "float32".into(),
            byte_order: "little".into(),
            axes: ["t", "y", "x", "c"].map(String::from).to_vec(),
            width: w,
            height: h,
            frames: t,
            channels: c,
            layout: self.layout,
        }
    }

    /// Raw little-endian `f32` values in tensor order.
    pub fn to_f32_le(&self) -> Vec<u8> {
        self.x.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
    }

    pub fn from_f32_le(bytes: &[u8], sidecar: &BundleSidecar) -> Result<Self> {
        if sidecar.dtype != "float32" || sidecar.byte_order != "little" || sidecar.axes != ["t", "y", "x", "c"] {
            return Err(ConditioningError::Shape(format!(
                "unsupported tensor encoding {} / {} / {:?}",
                sidecar.dtype, sidecar.byte_order, sidecar.axes
            )));
        }
        if sidecar.layout.total() != sidecar.channels {
            return Err(ConditioningError::Shape(format!(
                "layout covers {} channels, sidecar says {}",
                sidecar.layout.total(),
                sidecar.channels
            )));
        }
        if !bytes.len().is_multiple_of(4) {
            return Err(ConditioningError::Shape(format!("{} bytes is not a whole number of f32", bytes.len())));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Ok(Self {
            x: LatentTensor::new(sidecar.width, sidecar.height, sidecar.frames, sidecar.channels, data)?,
            layout: sidecar.layout,
        })
    }
}

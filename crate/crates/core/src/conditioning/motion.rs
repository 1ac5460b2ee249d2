//! Motion-area masks: foreground tracking, union and static-region clamping.

use super::{ConditioningError, LatentTensor, Result};
use crate::analysis::{block_flow, FlowParams};
use crate::media::{BinaryMask, FrameSequence};

/// Propagate `initial` through the clip with block flow.
///
/// Every pixel of frame `i` is carried to frame `i + 1` along its block's
/// vector and votes for its mask value; a target pixel is foreground when
/// foreground votes outnumber background votes. Pixels nothing lands on
/// are background.
pub fn track_foreground(seq: &FrameSequence, initial: &BinaryMask, flow: &FlowParams) -> Result<Vec<BinaryMask>> {
    let (w, h) = (seq.width(), seq.height());
    initial.check_dims(w, h)?;
    let mut masks = vec![initial.clone()];
    for i in 0..seq.len().saturating_sub(1) {
        let prev = &masks[i];
        if prev.is_empty() {
            masks.push(prev.clone());
            continue;
        }
        let field = block_flow(seq.frame(i), seq.frame(i + 1), flow)?;
        let mut votes = vec![0i32; w * h];
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = field.vectors[field.block_of(x, y)];
                let (tx, ty) = (x as i64 + i64::from(dx), y as i64 + i64::from(dy));
                if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
                    continue;
                }
                votes[ty as usize * w + tx as usize] += if prev.get(x, y) { 1 } else { -1 };
            }
        }
        masks.push(BinaryMask::new(w, h, votes.into_iter().map(|v| v > 0).collect())?);
    }
    Ok(masks)
}

/// Pixelwise OR of all masks.
pub fn union_masks(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let (first, rest) = masks
        .split_first()
        .ok_or_else(|| ConditioningError::InvalidParam("union of no masks".into()))?;
    rest.iter().try_fold(first.clone(), |acc, m| Ok(acc.union(m)?))
}

/// Replace every cell outside `moving` with the guide frame's value, in every latent frame.
///
/// `guide` has shape `(w, h, 1, c)`; `moving` is at the latent grid `w x h`.
pub fn clamp_static_latent(video: &LatentTensor, guide: &LatentTensor, moving: &BinaryMask) -> Result<LatentTensor> {
    let (w, h, t, c) = video.shape();
    if guide.shape() != (w, h, 1, c) {
        return Err(ConditioningError::Shape(format!(
            "guide frame {:?}, video latent {:?}",
            guide.shape(),
            video.shape()
        )));
    }
    if (moving.width(), moving.height()) != (w, h) {
        return Err(ConditioningError::Shape(format!(
            "motion mask {}x{}, latent grid {w}x{h}",
            moving.width(),
            moving.height()
        )));
    }
    let mut out = video.clone();
    for f in 0..t {
        for y in 0..h {
            for x in 0..w {
                if !moving.get(x, y) {
                    out.cell_mut(x, y, f).copy_from_slice(guide.cell(x, y, 0));
                }
            }
        }
    }
    Ok(out)
}

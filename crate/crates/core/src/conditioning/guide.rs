use super::latent::{SPATIAL_FACTOR, TEMPORAL_FACTOR};
use super::{ConditioningError, LatentTensor, MaskVolume, Result};
use crate::media::BinaryMask;

/// One guide frame placed at a latent position.
#[derive(Clone, Debug, PartialEq)]
pub struct Guide {
    pub position: usize,
    /// Encoded guide frame, shape `(w, h, 1, c)`.
    pub latent: LatentTensor,
    /// Spatial mask at pixel resolution `(8w, 8h)`; `None` guides the whole frame.
    pub mask: Option<BinaryMask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuidePlan {
    n_latent_frames: usize,
    /// Sorted by position.
    guides: Vec<Guide>,
    /// `(w, h, c)` shared by all guides.
    latent_dims: (usize, usize, usize),
}

impl GuidePlan {
    /// `latent_dims` is `(w, h, c)`; it is only consulted when `guides` is empty.
    pub fn new(n_latent_frames: usize, latent_dims: (usize, usize, usize), mut guides: Vec<Guide>) -> Result<Self> {
        if n_latent_frames == 0 {
            return Err(ConditioningError::InvalidParam("a plan needs at least one latent frame".into()));
        }
        guides.sort_by_key(|g| g.position);
        for pair in guides.windows(2) {
            if pair[0].position == pair[1].position {
                return Err(ConditioningError::DuplicatePosition(pair[0].position));
            }
        }
        let (w, h, c) = latent_dims;
        for g in &guides {
            if g.position >= n_latent_frames {
                return Err(ConditioningError::PositionOutOfRange {
                    position: g.position,
                    n: n_latent_frames,
                });
            }
            if g.latent.shape() != (w, h, 1, c) {
                return Err(ConditioningError::Shape(format!(
                    "guide at {}: latent {:?}, plan expects {:?}",
                    g.position,
                    g.latent.shape(),
                    (w, h, 1, c)
                )));
            }
            if let Some(m) = &g.mask {
                if m.width() != w * SPATIAL_FACTOR || m.height() != h * SPATIAL_FACTOR {
                    return Err(ConditioningError::Shape(format!(
                        "guide at {}: mask {}x{}, plan expects {}x{}",
                        g.position,
                        m.width(),
                        m.height(),
                        w * SPATIAL_FACTOR,
                        h * SPATIAL_FACTOR
                    )));
                }
            }
        }
        Ok(Self {
            n_latent_frames,
            guides,
            latent_dims,
        })
    }

    pub fn n_latent_frames(&self) -> usize {
        self.n_latent_frames
    }

    pub fn guides(&self) -> &[Guide] {
        &self.guides
    }

    pub fn positions(&self) -> Vec<usize> {
        self.guides.iter().map(|g| g.position).collect()
    }

    pub fn latent_dims(&self) -> (usize, usize, usize) {
        self.latent_dims
    }
}

/// Guide sequence `G` of shape `(w, h, n, c)` and mask `M` at pixel
/// resolution `(8w, 8h, 4n)`: each latent position spans four pixel frames.
pub fn build_guide(plan: &GuidePlan) -> (LatentTensor, MaskVolume) {
    let (w, h, c) = plan.latent_dims;
    let n = plan.n_latent_frames;
    let mut g = LatentTensor::zeros(w, h, n, c);
    let (pw, ph) = (w * SPATIAL_FACTOR, h * SPATIAL_FACTOR);
    let mut m = MaskVolume::zeros(pw, ph, n * TEMPORAL_FACTOR);
    for guide in &plan.guides {
        for y in 0..h {
            for x in 0..w {
                g.cell_mut(x, y, guide.position).copy_from_slice(guide.latent.cell(x, y, 0));
            }
        }
        for f in guide.position * TEMPORAL_FACTOR..(guide.position + 1) * TEMPORAL_FACTOR {
            for y in 0..ph {
                for x in 0..pw {
                    let on = guide.mask.as_ref().is_none_or(|mask| mask.get(x, y));
                    m.set(x, y, f, on);
                }
            }
        }
    }
    (g, m)
}

/// Downsample `mask` to the latent grid `(w, h, t)`. Each axis must be an
/// exact multiple of its latent size; a cell is set when strictly more than
/// half of its block is set. A mask already at `(w, h, t)` is returned as is.
pub fn reproject_mask(mask: &MaskVolume, latent_grid: (usize, usize, usize)) -> Result<MaskVolume> {
    let (w, h, t) = latent_grid;
    let (mw, mh, mt) = mask.dims();
    if w * h * t == 0 || mw % w.max(1) != 0 || mh % h.max(1) != 0 || mt % t.max(1) != 0 {
        return Err(ConditioningError::Shape(format!(
            "mask {:?} does not tile latent grid {:?}",
            mask.dims(),
            latent_grid
        )));
    }
    let (fx, fy, ft) = (mw / w, mh / h, mt / t);
    if (fx, fy, ft) == (1, 1, 1) {
        return Ok(mask.clone());
    }
    let block = fx * fy * ft;
    let mut counts = vec![0usize; w * h * t];
    for f in 0..mt {
        for y in 0..mh {
            for x in 0..mw {
                if mask.get(x, y, f) {
                    counts[((f / ft) * h + y / fy) * w + x / fx] += 1;
                }
            }
        }
    }
    MaskVolume::new(w, h, t, counts.into_iter().map(|n| 2 * n > block).collect())
}

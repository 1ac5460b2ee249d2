//! Block-matching optical flow and the clip-level flow score.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};
use crate::media::{to_luma, Frame, FrameSequence, LumaPlane};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    /// Block edge in pixels.
    pub block: usize,
    /// Search radius in pixels along each axis.
    pub radius: usize,
    /// Frame pairs are sampled at no more than this rate.
    pub max_fps: f64,
    /// Minimum fraction of a block that must stay inside the target frame
    /// for a candidate vector to be considered.
    pub min_overlap: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            block: 8,
            radius: 7,
            max_fps: 8.0,
            min_overlap: 0.5,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.block < 2 {
            return Err(AnalysisError::InvalidParam(format!("block must be >= 2, got {}", self.block)));
        }
        if !(self.max_fps > 0.0) {
            return Err(AnalysisError::InvalidParam("max_fps must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(AnalysisError::InvalidParam("min_overlap must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-block motion vectors on a `cols` x `rows` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub cols: usize,
    pub rows: usize,
    pub block: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    /// Row-major `(dx, dy)`: content at `p` in the first frame is found at `p + (dx, dy)` in the second.
    pub vectors: Vec<(i32, i32)>,
    /// Mean absolute luma residual at the chosen vector.
    pub costs: Vec<f64>,
}

impl FlowField {
    pub fn vector(&self, col: usize, row: usize) -> (i32, i32) {
        self.vectors[row * self.cols + col]
    }

    /// Block index covering pixel `(x, y)`.
    pub fn block_of(&self, x: usize, y: usize) -> usize {
        (y / self.block) * self.cols + x / self.block
    }

    /// Pixel extent `[x0, x1) x [y0, y1)` of block `index`.
    pub fn block_rect(&self, index: usize) -> (usize, usize, usize, usize) {
        let (c, r) = (index % self.cols, index / self.cols);
        let x0 = c * self.block;
        let y0 = r * self.block;
        (
            x0,
            y0,
            (x0 + self.block).min(self.frame_width),
            (y0 + self.block).min(self.frame_height),
        )
    }

    /// Integer block centre, inside the frame.
    pub fn block_center(&self, index: usize) -> (usize, usize) {
        let (x0, y0, x1, y1) = self.block_rect(index);
        ((x0 + x1 - 1) / 2, (y0 + y1 - 1) / 2)
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.vectors
            .iter()
            .map(|&(dx, dy)| f64::from(dx).hypot(f64::from(dy)))
    }

    pub fn mean_magnitude(&self) -> f64 {
        self.magnitudes().sum::<f64>() / self.vectors.len() as f64
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }
}

/// Candidate vectors in tie-break order: smallest `|dx| + |dy|`, then smallest `dy`, then `dx`.
fn candidates(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut out: Vec<(i32, i32)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    out.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));
    out
}

pub fn block_flow(a: &Frame, b: &Frame, params: &FlowParams) -> Result<FlowField> {
    if a.dims() != b.dims() {
        return Err(AnalysisError::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    block_flow_luma(&to_luma(a), &to_luma(b), params)
}

/// Exhaustive block matching on luma planes.
///
/// Each block of `a` is compared against `b` displaced by every vector
/// within `radius`; the cost is the mean absolute difference over the part
/// of the block that stays inside `b`.
pub fn block_flow_luma(a: &LumaPlane, b: &LumaPlane, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if (a.width, a.height) != (b.width, b.height) {
        return Err(AnalysisError::DimensionMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        });
    }
    let (w, h) = (a.width as i64, a.height as i64);
    let bs = params.block;
    let cols = a.width.div_ceil(bs);
    let rows = a.height.div_ceil(bs);
    let cands = candidates(params.radius);
    let mut vectors = Vec::with_capacity(cols * rows);
    let mut costs = Vec::with_capacity(cols * rows);

    for r in 0..rows {
        for c in 0..cols {
            let x0 = (c * bs) as i64;
            let y0 = (r * bs) as i64;
            let x1 = (x0 + bs as i64).min(w);
            let y1 = (y0 + bs as i64).min(h);
            let area = ((x1 - x0) * (y1 - y0)) as f64;
            let need = (params.min_overlap * area).ceil().max(1.0) as i64;

            let mut best = ((0, 0), f64::INFINITY);
            for &(dx, dy) in &cands {
                let (dx64, dy64) = (i64::from(dx), i64::from(dy));
                let vx0 = x0.max(-dx64);
                let vx1 = x1.min(w - dx64);
                let vy0 = y0.max(-dy64);
                let vy1 = y1.min(h - dy64);
                if vx1 <= vx0 || vy1 <= vy0 {
                    continue;
                }
                let n = (vx1 - vx0) * (vy1 - vy0);
                if n < need {
                    continue;
                }
                let mut sad = 0.0;
                for y in vy0..vy1 {
                    let ra = y * w;
                    let rb = (y + dy64) * w + dx64;
                    let sa = &a.data[(ra + vx0) as usize..(ra + vx1) as usize];
                    let sb = &b.data[(rb + vx0) as usize..(rb + vx1) as usize];
                    sad += sa.iter().zip(sb).map(|(p, q)| (p - q).abs()).sum::<f64>();
                }
                let cost = sad / n as f64;
                if cost < best.1 {
                    best = ((dx, dy), cost);
                }
            }
            vectors.push(best.0);
            costs.push(best.1);
        }
    }
    Ok(FlowField {
        cols,
        rows,
        block: bs,
        frame_width: a.width,
        frame_height: a.height,
        vectors,
        costs,
    })
}

/// Frame pairs `(i, j)` used for clip-level flow statistics: consecutive
/// frames when the clip is at most `max_fps`, otherwise every `step`-th frame
/// so the effective rate stays at or below `max_fps`.
pub fn sampled_pairs(len: usize, fps: f64, max_fps: f64) -> Vec<(usize, usize)> {
    if len < 2 {
        return Vec::new();
    }
    let step = ((fps / max_fps) - 1e-9).ceil().max(1.0) as usize;
    let mut pairs: Vec<(usize, usize)> = (0..)
        .map(|k| k * step)
        .take_while(|&i| i + step < len)
        .map(|i| (i, i + step))
        .collect();
    if pairs.is_empty() {
        pairs.push((0, len - 1));
    }
    pairs
}

/// Flow fields for every sampled pair, together with the pair gap in frames.
pub fn sampled_flows(seq: &FrameSequence, params: &FlowParams) -> Result<Vec<(usize, FlowField)>> {
    if seq.len() < 2 {
        return Err(AnalysisError::FlowUndefined);
    }
    let pairs = sampled_pairs(seq.len(), seq.fps().as_f64(), params.max_fps);
    let mut luma: Vec<Option<LumaPlane>> = vec![None; seq.len()];
    for &(i, j) in &pairs {
        for k in [i, j] {
            if luma[k].is_none() {
                luma[k] = Some(to_luma(seq.frame(k)));
            }
        }
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            let field = block_flow_luma(luma[i].as_ref().unwrap(), luma[j].as_ref().unwrap(), params)?;
            Ok((j - i, field))
        })
        .collect()
}

/// Mean block-motion magnitude in pixels per second.
pub fn flow_score(seq: &FrameSequence, params: &FlowParams) -> Result<f64> {
    let fps = seq.fps().as_f64();
    let flows = sampled_flows(seq, params)?;
    let total: f64 = flows
        .iter()
        .map(|(gap, field)| field.mean_magnitude() * fps / *gap as f64)
        .sum();
    Ok(total / flows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::Fps;
    use crate::synth;

    fn params() -> FlowParams {
        FlowParams::default()
    }

    #[test]
    fn candidate_order_follows_tie_rule() {
        let c = candidates(1);
        assert_eq!(c[0], (0, 0));
        assert_eq!(&c[1..5], &[(0, -1), (-1, 0), (1, 0), (0, 1)]);
    }

    #[test]
    fn identical_frames_zero_flow() {
        let f = synth::noise_frame(32, 24, 5);
        let field = block_flow(&f, &f, &params()).unwrap();
        assert_eq!((field.cols, field.rows), (4, 3));
        assert!(field.vectors.iter().all(|&v| v == (0, 0)));
    }

    #[test]
    fn uniform_frames_prefer_zero_vector() {
        let f = Frame::filled(16, 16, [90, 90, 90]).unwrap();
        let field = block_flow(&f, &f, &params()).unwrap();
        assert!(field.vectors.iter().all(|&v| v == (0, 0)));
    }

    #[test]
    fn wrapped_shift_interior_blocks() {
        let f = synth::noise_frame(64, 64, 11);
        let g = synth::wrap_shift(&f, 2, 0);
        let field = block_flow(&f, &g, &params()).unwrap();
        for r in 1..field.rows - 1 {
            for c in 1..field.cols - 1 {
                assert_eq!(field.vector(c, r), (2, 0));
            }
        }
    }

    #[test]
    fn shift_beyond_radius_saturates() {
        let f = synth::noise_frame(48, 48, 12);
        let g = synth::wrap_shift(&f, 9, 0);
        let field = block_flow(&f, &g, &params()).unwrap();
        assert!(field.vectors.iter().all(|&(dx, dy)| dx.abs() <= 7 && dy.abs() <= 7));
    }

    #[test]
    fn ragged_grid_dimensions() {
        let f = synth::noise_frame(20, 9, 1);
        let field = block_flow(&f, &f, &params()).unwrap();
        assert_eq!((field.cols, field.rows), (3, 2));
        assert_eq!(field.block_rect(5), (16, 8, 20, 9));
    }

    #[test]
    fn static_clip_scores_zero() {
        let f = synth::noise_frame(16, 16, 2);
        let seq = FrameSequence::still(f, 6, Fps::integer(8).unwrap(), "s").unwrap();
        assert_eq!(flow_score(&seq, &params()).unwrap(), 0.0);
    }

    #[test]
    fn uniform_motion_at_8fps() {
        let seq = synth::translating_noise(48, 32, 6, (2, 0), 8, 3);
        assert!((flow_score(&seq, &params()).unwrap() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn score_is_reversal_invariant() {
        let seq = synth::translating_noise(40, 40, 5, (1, 2), 8, 9);
        let mut rev: Vec<Frame> = seq.frames().to_vec();
        rev.reverse();
        let rev = FrameSequence::new(rev, seq.fps(), "r").unwrap();
        let a = flow_score(&seq, &params()).unwrap();
        let b = flow_score(&rev, &params()).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        assert!((a - 8.0 * 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn high_fps_is_subsampled() {
        assert_eq!(sampled_pairs(7, 24.0, 8.0), vec![(0, 3), (3, 6)]);
        assert_eq!(sampled_pairs(3, 24.0, 8.0), vec![(0, 2)]);
        assert_eq!(sampled_pairs(3, 8.0, 8.0), vec![(0, 1), (1, 2)]);
        // 24 fps, 1 px/frame over every third frame is still 24 px/s
        let seq = synth::translating_noise(32, 32, 7, (1, 0), 24, 4);
        assert!((flow_score(&seq, &params()).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn single_frame_flow_is_undefined() {
        let seq = FrameSequence::still(Frame::filled(8, 8, [0; 3]).unwrap(), 1, Fps::integer(8).unwrap(), "s").unwrap();
        assert!(matches!(flow_score(&seq, &params()), Err(AnalysisError::FlowUndefined)));
    }
}

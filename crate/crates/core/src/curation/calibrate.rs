//! Solve the three non-duration thresholds for a retention target.
//!
//! All three thresholds are tied to one keep fraction `k`: text cover at
//! its `k` quantile, aesthetics at its `1 - k` quantile, and flow at the
//! central `k` band. The joint pass rate is non-decreasing in `k`, so `k`
//! is found by bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClipScores, CurationError, Dimension, FilterRule, Result, DURATION_MAX, DURATION_MIN};

pub const MIN_SAMPLES: usize = 100;
const TOLERANCE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rule: FilterRule,
    pub target: f64,
    /// Pass rate of `rule` on the calibration sample.
    pub achieved: f64,
    pub keep_fraction: f64,
    /// Pass rate of the duration bounds alone.
    pub duration_pass: f64,
    pub samples: usize,
}

/// Linearly interpolated quantile of ascending `sorted`, `p` in `[0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

struct Columns {
    text_cover: Vec<f64>,
    flow: Vec<f64>,
    aesthetic: Vec<f64>,
    duration: Vec<f64>,
}

impl Columns {
    fn from_scores(scores: &[ClipScores]) -> Result<Self> {
        let missing = |i: usize, d: Dimension| CurationError::MissingScore {
            clip: format!("#{i}"),
            dimension: d,
        };
        let mut c = Columns {
            text_cover: Vec::with_capacity(scores.len()),
            flow: Vec::with_capacity(scores.len()),
            aesthetic: Vec::with_capacity(scores.len()),
            duration: Vec::with_capacity(scores.len()),
        };
        for (i, s) in scores.iter().enumerate() {
            c.text_cover.push(s.text_cover.ok_or_else(|| missing(i, Dimension::TextCover))?);
            c.flow.push(s.flow.ok_or_else(|| missing(i, Dimension::Flow))?);
            c.aesthetic.push(s.aesthetic.ok_or_else(|| missing(i, Dimension::Aesthetic))?);
            c.duration.push(s.duration);
        }
        Ok(c)
    }

    fn sorted(v: &[f64]) -> Vec<f64> {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    }
}

struct Solver {
    cols: Columns,
    sorted_text: Vec<f64>,
    sorted_flow: Vec<f64>,
    sorted_aesthetic: Vec<f64>,
}

impl Solver {
    fn rule(&self, k: f64) -> FilterRule {
        let flow_min = quantile(&self.sorted_flow, (1.0 - k) / 2.0);
        let mut flow_max = quantile(&self.sorted_flow, (1.0 + k) / 2.0);
        if flow_max <= flow_min {
            flow_max = flow_min + f64::EPSILON * flow_min.abs().max(1.0);
        }
        FilterRule {
            text_cover_max: quantile(&self.sorted_text, k),
            flow_min,
            flow_max,
            aesthetic_min: quantile(&self.sorted_aesthetic, 1.0 - k),
            duration_min: DURATION_MIN,
            duration_max: DURATION_MAX,
        }
    }

    fn pass_rate(&self, rule: &FilterRule) -> f64 {
        let c = &self.cols;
        let passed = (0..c.duration.len())
            .filter(|&i| {
                c.text_cover[i] <= rule.text_cover_max
                    && (rule.flow_min..=rule.flow_max).contains(&c.flow[i])
                    && c.aesthetic[i] >= rule.aesthetic_min
                    && (rule.duration_min..=rule.duration_max).contains(&c.duration[i])
            })
            .count();
        passed as f64 / c.duration.len() as f64
    }
}

/// Thresholds whose joint pass rate on `scores` is within 10% (relative) of `target`.
pub fn calibrate(scores: &[ClipScores], target: f64) -> Result<Calibration> {
    if scores.len() < MIN_SAMPLES {
        return Err(CurationError::TooFewSamples {
            min: MIN_SAMPLES,
            got: scores.len(),
        });
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(CurationError::InvalidTarget { target });
    }
    let cols = Columns::from_scores(scores)?;
    let solver = Solver {
        sorted_text: Columns::sorted(&cols.text_cover),
        sorted_flow: Columns::sorted(&cols.flow),
        sorted_aesthetic: Columns::sorted(&cols.aesthetic),
        cols,
    };
    let rate = |k: f64| solver.pass_rate(&solver.rule(k));
    let (floor, ceiling) = (rate(0.0), rate(1.0));
    if target > ceiling * (1.0 + TOLERANCE) || target < floor * (1.0 - TOLERANCE) {
        return Err(CurationError::Unreachable {
            target,
            min: floor,
            max: ceiling,
        });
    }
    // invariant: rate(lo) < target <= rate(hi)
    let (mut lo, mut hi) = (0.0, 1.0);
    if floor >= target {
        hi = 0.0;
    } else {
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let miss = |k: f64| (rate(k) - target).abs();
    let k = if hi > 0.0 && miss(lo) < miss(hi) { lo } else { hi };
    let rule = solver.rule(k);
    let achieved = solver.pass_rate(&rule);
    if (achieved - target).abs() > TOLERANCE * target {
        return Err(CurationError::CalibrationMiss { target, achieved });
    }
    Ok(Calibration {
        rule,
        target,
        achieved,
        keep_fraction: k,
        duration_pass: ceiling,
        samples: scores.len(),
    })
}

/// Independent uniform scores: text cover in `[0, 1)`, flow in `[0, 200)`
/// px/s, aesthetics in `[0, 10)` and duration in `[0.5, 30)` s at 24 fps.
pub fn synthetic_scores(n: usize, seed: u64) -> Vec<ClipScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let duration: f64 = rng.gen_range(0.5..30.0);
            ClipScores {
                text_cover: Some(rng.gen_range(0.0..1.0)),
                flow: Some(rng.gen_range(0.0..200.0)),
                aesthetic: Some(rng.gen_range(0.0..10.0)),
                duration,
                frame_count: (duration * 24.0).round().max(1.0) as usize,
            }
        })
        .collect()
}

//! Training-time choice of which frames stay unmasked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConditioningError, Result};

/// First frame, last frame and `k` evenly spaced interior frames, deduplicated and sorted.
pub fn unmask_candidates(n_frames: usize, k: usize) -> Result<Vec<usize>> {
    if n_frames < 2 {
        return Err(ConditioningError::TooFewFrames(n_frames));
    }
    let last = n_frames - 1;
    let mut out = vec![0, last];
    for j in 1..=k {
        let p = ((j * last) as f64 / (k + 1) as f64).round() as usize;
        if p > 0 && p < last {
            out.push(p);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Keep each candidate independently with probability 0.5.
///
/// Draws that keep nothing or everything are redrawn on the next stream of
/// the same seed. Rejecting both extremes keeps the per-candidate marginal
/// at exactly one half; rejecting only the empty draw would push it above.
pub fn sample_unmask_plan(n_frames: usize, seed: u64, k: usize) -> Result<Vec<usize>> {
    let candidates = unmask_candidates(n_frames, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for stream in 0u64.. {
        rng.set_stream(stream);
        rng.set_word_pos(0);
        let plan: Vec<usize> = candidates.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if !plan.is_empty() && plan.len() < candidates.len() {
            return Ok(plan);
        }
    }
    unreachable!("stream counter exhausted")
}

//! Reference aesthetic composite: colourfulness, RMS contrast and Laplacian
//! sharpness, each normalised to `[0, 1]` and blended into a 0..=10 score.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};
use crate::media::{to_luma, Frame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AestheticParams {
    /// Hasler-Süsstrunk colourfulness (0..=255 channel scale) mapped to 1.0.
    pub colorfulness_norm: f64,
    /// Luma standard deviation mapped to 1.0.
    pub contrast_norm: f64,
    /// Variance of the 4-neighbour Laplacian of luma mapped to 1.0.
    pub sharpness_norm: f64,
    /// Weights for colourfulness, contrast and sharpness; must sum to 1.
    pub weights: [f64; 3],
}

impl Default for AestheticParams {
    fn default() -> Self {
        Self {
            colorfulness_norm: 120.0,
            contrast_norm: 0.5,
            sharpness_norm: 0.05,
            weights: [0.4, 0.3, 0.3],
        }
    }
}

impl AestheticParams {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|&w| w < 0.0) {
            return Err(AnalysisError::InvalidParam(format!(
                "aesthetic weights must be non-negative and sum to 1, got {:?}",
                self.weights
            )));
        }
        if [self.colorfulness_norm, self.contrast_norm, self.sharpness_norm]
            .iter()
            .any(|&n| !(n > 0.0))
        {
            return Err(AnalysisError::InvalidParam("aesthetic norms must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AestheticParts {
    pub colorfulness: f64,
    pub contrast: f64,
    pub sharpness: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalised sub-scores, each clamped to `[0, 1]`.
pub fn aesthetic_parts(frame: &Frame, params: &AestheticParams) -> AestheticParts {
    let rg: Vec<f64> = frame.rgb_pixels().map(|p| f64::from(p[0]) - f64::from(p[1])).collect();
    let yb: Vec<f64> = frame
        .rgb_pixels()
        .map(|p| 0.5 * (f64::from(p[0]) + f64::from(p[1])) - f64::from(p[2]))
        .collect();
    let (mu_rg, sd_rg) = mean_std(&rg);
    let (mu_yb, sd_yb) = mean_std(&yb);
    let colorfulness = sd_rg.hypot(sd_yb) + 0.3 * mu_rg.hypot(mu_yb);

    let luma = to_luma(frame);
    let (_, contrast) = mean_std(&luma.data);

    let (w, h) = (luma.width as isize, luma.height as isize);
    let lap: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            luma.get_clamped(x - 1, y)
                + luma.get_clamped(x + 1, y)
                + luma.get_clamped(x, y - 1)
                + luma.get_clamped(x, y + 1)
                - 4.0 * luma.get_clamped(x, y)
        })
        .collect();
    let (_, lap_sd) = mean_std(&lap);

    AestheticParts {
        colorfulness: (colorfulness / params.colorfulness_norm).clamp(0.0, 1.0),
        contrast: (contrast / params.contrast_norm).clamp(0.0, 1.0),
        sharpness: (lap_sd * lap_sd / params.sharpness_norm).clamp(0.0, 1.0),
    }
}

/// Weighted composite on a 0..=10 scale.
pub fn aesthetic_ref_score(frame: &Frame, params: &AestheticParams) -> f64 {
    let p = aesthetic_parts(frame, params);
    let [wc, wk, ws] = params.weights;
    (10.0 * (wc * p.colorfulness + wk * p.contrast + ws * p.sharpness)).clamp(0.0, 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn uniform_gray_scores_zero() {
        let f = Frame::filled(16, 16, [128, 128, 128]).unwrap();
        let p = aesthetic_parts(&f, &AestheticParams::default());
        assert!(p.colorfulness.max(p.contrast).max(p.sharpness) < 1e-9, "{p:?}");
        assert!(aesthetic_ref_score(&f, &AestheticParams::default()) < 1e-9);
    }

    #[test]
    fn checkerboard_beats_gray() {
        let gray = Frame::filled(16, 16, [128, 128, 128]).unwrap();
        let check = Frame::from_fn(16, 16, |x, y| if (x + y) % 2 == 0 { [0; 3] } else { [255; 3] }).unwrap();
        let p = AestheticParams::default();
        assert!(aesthetic_ref_score(&check, &p) > aesthetic_ref_score(&gray, &p));
    }

    #[test]
    fn bounded_over_random_frames() {
        let p = AestheticParams::default();
        for seed in 0..1000 {
            let s = aesthetic_ref_score(&synth::noise_frame(12, 12, seed), &p);
            assert!((0.0..=10.0).contains(&s));
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let p = AestheticParams {
            weights: [0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(AestheticParams::default().validate().is_ok());
    }
}

//! Overlay-text coverage: Sobel edges, Otsu binarisation and glyph-shaped
//! component filtering inside a horizontal band of the frame.

use serde::{Deserialize, Serialize};

use crate::media::{connected_components, to_luma, BinaryMask, Frame, LumaPlane};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextParams {
    /// Height of the inspected bottom band as a fraction of the frame.
    pub band_fraction: f64,
    /// Inspect the whole frame instead of the bottom band.
    pub full_frame: bool,
    /// Frames whose strongest Sobel response is below this have no text.
    pub min_gradient: f64,
    pub min_region_pixels: usize,
    /// Regions larger than this fraction of the band are not glyphs.
    pub max_region_fraction: f64,
    /// Allowed bounding-box width / height.
    pub aspect_min: f64,
    pub aspect_max: f64,
}

impl Default for TextParams {
    fn default() -> Self {
        Self {
            band_fraction: 0.25,
            full_frame: false,
            min_gradient: 0.25,
            min_region_pixels: 4,
            max_region_fraction: 0.2,
            aspect_min: 0.1,
            aspect_max: 10.0,
        }
    }
}

fn sobel_magnitude(luma: &LumaPlane, x: usize, y: usize) -> f64 {
    let p = |dx: isize, dy: isize| luma.get_clamped(x as isize + dx, y as isize + dy);
    let gx = p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
    let gy = p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
    gx.hypot(gy)
}

/// Otsu threshold of `values` over a 256-bin histogram spanning `[0, max]`.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let mut hist = [0usize; 256];
    for &v in values {
        let bin = ((v / max) * 255.0).round().clamp(0.0, 255.0) as usize;
        hist[bin] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_bin, mut best_var) = (0usize, -1.0);
    for (i, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += i as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_bin = i;
        }
    }
    (best_bin as f64 + 0.5) / 255.0 * max
}

/// Fraction of the inspected band covered by glyph-like edge regions, in `[0, 1]`.
pub fn text_cover_score(frame: &Frame, params: &TextParams) -> f64 {
    let luma = to_luma(frame);
    let (w, h) = (frame.width(), frame.height());
    let band_rows = if params.full_frame {
        h
    } else {
        ((h as f64 * params.band_fraction).ceil() as usize).clamp(1, h)
    };
    let top = h - band_rows;
    let mags: Vec<f64> = (top..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| sobel_magnitude(&luma, x, y))
        .collect();
    if mags.iter().copied().fold(0.0, f64::max) < params.min_gradient {
        return 0.0;
    }
    let threshold = otsu_threshold(&mags).max(params.min_gradient);
    let mask = BinaryMask::new(w, band_rows, mags.iter().map(|&m| m > threshold).collect())
        .expect("band dimensions");
    let band_area = (w * band_rows) as f64;
    let max_pixels = params.max_region_fraction * band_area;
    let covered: usize = connected_components(&mask)
        .into_iter()
        .filter(|r| {
            let aspect = r.bbox.width() as f64 / r.bbox.height() as f64;
            r.pixel_count >= params.min_region_pixels
                && (r.pixel_count as f64) <= max_pixels
                && (params.aspect_min..=params.aspect_max).contains(&aspect)
        })
        // the 3x3 kernel spreads each stroke edge by one pixel on every side
        .map(|r| r.bbox.width().saturating_sub(2).max(1) * r.bbox.height().saturating_sub(2).max(1))
        .sum();
    (covered as f64 / band_area).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// White 128x64 frame with a row of ten 2x10 dark strokes (200 px, about 10%
    /// of the 2048 px bottom band) starting at row `top`.
    fn text_row(top: usize) -> Frame {
        Frame::from_fn(128, 64, |x, y| {
            let in_row = (top..top + 10).contains(&y);
            let glyph = (8..8 + 10 * 10).contains(&x) && (x - 8) % 10 < 2;
            if in_row && glyph {
                [10, 10, 10]
            } else {
                [245, 245, 245]
            }
        })
        .unwrap()
    }

    #[test]
    fn uniform_frame_has_no_text() {
        let f = Frame::filled(64, 64, [128, 40, 200]).unwrap();
        assert_eq!(text_cover_score(&f, &TextParams::default()), 0.0);
    }

    #[test]
    fn bottom_text_row_is_measured() {
        let s = text_cover_score(&text_row(51), &TextParams::default());
        assert!((0.05..=0.2).contains(&s), "score {s}");
    }

    #[test]
    fn top_text_is_outside_band() {
        assert_eq!(text_cover_score(&text_row(4), &TextParams::default()), 0.0);
        let full = TextParams {
            full_frame: true,
            ..TextParams::default()
        };
        assert!(text_cover_score(&text_row(4), &full) > 0.0);
    }

    #[test]
    fn otsu_splits_bimodal_values() {
        let mut v = vec![0.1; 50];
        v.extend(vec![0.9; 50]);
        let t = otsu_threshold(&v);
        assert!(t > 0.1 && t < 0.9, "{t}");
    }
}

//! RGB to HSV with every channel scaled to `[0, 255]`.

use crate::media::Frame;

/// Hue, saturation and value of one pixel, each in `[0, 255]`.
pub fn rgb_to_hsv255(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue_deg = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    [hue_deg * 255.0 / 360.0, sat * 255.0, max * 255.0]
}

/// Per-pixel HSV planes of a frame, cached for repeated delta computation.
#[derive(Clone, Debug)]
pub struct HsvFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl HsvFrame {
    pub fn new(frame: &Frame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            pixels: frame.rgb_pixels().map(rgb_to_hsv255).collect(),
        }
    }
}

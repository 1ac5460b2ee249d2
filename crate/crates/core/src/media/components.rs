//! 4-connected component labelling over [`BinaryMask`].

use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub pixel_count: usize,
    pub bbox: BoundingBox,
    /// Row-major pixel indices belonging to the region, ascending.
    pub pixels: Vec<usize>,
}

impl Region {
    /// The region as a mask on a `width` x `height` canvas.
    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut bits = vec![false; width * height];
        for &p in &self.pixels {
            bits[p] = true;
        }
        BinaryMask::new(width, height, bits).expect("region pixels lie inside the canvas")
    }
}

/// Label the set pixels of `mask` into 4-connected regions.
///
/// Regions are returned in raster order of their first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Region> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut seen = vec![false; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let mut bbox = BoundingBox {
            x0: start % w,
            y0: start / w,
            x1: start % w,
            y1: start / w,
        };
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (x, y) = (p % w, p / w);
            bbox.x0 = bbox.x0.min(x);
            bbox.x1 = bbox.x1.max(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.y1 = bbox.y1.max(y);
            let mut visit = |q: usize| {
                if bits[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        pixels.sort_unstable();
        regions.push(Region {
            pixel_count: pixels.len(),
            bbox,
            pixels,
        });
    }
    regions
}

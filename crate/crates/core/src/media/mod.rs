//! Frames, frame sequences, binary masks and the pixel utilities shared by
//! every other module.
//!
//! Canonical ingest is YUV4MPEG2 ([`parse_y4m`]) with a directory of binary
//! PPM files ([`read_frame_dir`]) as fallback. Compressed containers must be
//! decoded externally, e.g. `ffmpeg -i in.mp4 -pix_fmt yuv444p -f yuv4mpeg2 out.y4m`.

mod components;
mod ppm;
mod y4m;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use components::{connected_components, BoundingBox, Region};
pub use ppm::{decode_ppm, encode_ppm, read_frame_dir, write_frame_dir};
pub use y4m::{parse_y4m, write_y4m, ColorRange};

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("y4m: malformed header token `{token}`: {reason}")]
    Header { token: String, reason: String },
    #[error("y4m: no frames")]
    NoFrames,
    #[error("y4m: frame {index} truncated: expected {expected} bytes, got {got}")]
    TruncatedFrame {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("y4m: frame {index}: expected FRAME marker")]
    BadFrameMarker { index: usize },
    #[error("ppm {path}: {reason}")]
    Ppm { path: String, reason: String },
    #[error("frame directory {0} contains no .ppm files")]
    EmptyDir(String),
    #[error("dimension mismatch: {path} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DirDimensionMismatch {
        path: String,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid frame rate `{0}`")]
    InvalidFps(String),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("mask is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MaskDimensions {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MediaError> = std::result::Result<T, E>;

/// A single RGB frame, 8 bits per channel, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidFrame(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(MediaError::InvalidFrame(format!(
                "{width}x{height} frame needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, pixels)
    }

    /// Build a frame by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn rgb_pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Crop to the inclusive box `bbox`, zeroing every pixel where `mask` is unset.
    pub fn masked_crop(&self, mask: &BinaryMask, bbox: BoundingBox) -> Result<Frame> {
        mask.check_dims(self.width, self.height)?;
        let (w, h) = (bbox.width(), bbox.height());
        Frame::from_fn(w, h, |x, y| {
            let (sx, sy) = (bbox.x0 + x, bbox.y0 + y);
            if mask.get(sx, sy) {
                self.pixel(sx, sy)
            } else {
                [0, 0, 0]
            }
        })
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// Frame rate as an exact rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fps {
    num: u32,
    den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(MediaError::InvalidFps(format!("{num}:{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fps {
    type Err = MediaError;

    /// Accepts `num/den`, `num:den` or a bare integer.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || MediaError::InvalidFps(s.to_string());
        let (n, d) = match s.split_once(['/', ':']) {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let num = n.trim().parse().map_err(|_| bad())?;
        let den = d.trim().parse().map_err(|_| bad())?;
        Fps::new(num, den).map_err(|_| bad())
    }
}

impl Serialize for Fps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Decoded video: ordered frames of equal dimensions plus a frame rate.
///
/// Frames are reference counted so sub-clips share storage.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    frames: Arc<[Frame]>,
    fps: Fps,
    source_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: Fps, source_id: impl Into<String>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(MediaError::NoFrames);
        };
        let dims = first.dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(MediaError::InvalidFrame(format!(
                "frame {i} is {}x{}, expected {}x{}",
                f.width, f.height, dims.0, dims.1
            )));
        }
        Ok(Self {
            frames: frames.into(),
            fps,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &Frame {
        &self.frames[index]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 * f64::from(self.fps.den) / f64::from(self.fps.num)
    }

    /// Frames `range` as a new sequence with the given id.
    pub fn slice(&self, range: std::ops::Range<usize>, source_id: impl Into<String>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(MediaError::InvalidFrame(format!(
                "range {}..{} outside 0..{}",
                range.start,
                range.end,
                self.len()
            )));
        }
        Self::new(self.frames[range].to_vec(), self.fps, source_id)
    }

    /// A still clip: `count` copies of one frame.
    pub fn still(frame: Frame, count: usize, fps: Fps, source_id: impl Into<String>) -> Result<Self> {
        Self::new(vec![frame; count.max(1)], fps, source_id)
    }
}

/// One boolean per pixel, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(MediaError::InvalidFrame(format!(
                "mask {width}x{height} with {} bits",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if (self.width, self.height) != (width, height) {
            return Err(MediaError::MaskDimensions {
                got_w: self.width,
                got_h: self.height,
                want_w: width,
                want_h: height,
            });
        }
        Ok(())
    }

    /// Pixelwise OR. Dimensions must match.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        other.check_dims(self.width, self.height)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// 4-neighbourhood dilation by `radius` pixels.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        let mut out = self.clone();
        for _ in 0..radius {
            let prev = out.clone();
            for y in 0..self.height {
                for x in 0..self.width {
                    if prev.get(x, y) {
                        continue;
                    }
                    let hit = (x > 0 && prev.get(x - 1, y))
                        || (x + 1 < self.width && prev.get(x + 1, y))
                        || (y > 0 && prev.get(x, y - 1))
                        || (y + 1 < self.height && prev.get(x, y + 1));
                    if hit {
                        out.set(x, y, true);
                    }
                }
            }
        }
        out
    }

    /// Tight box around all set pixels, `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bbox: Option<BoundingBox> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i % self.width, i / self.width);
            bbox = Some(match bbox {
                None => BoundingBox { x0: x, y0: y, x1: x, y1: y },
                Some(b) => BoundingBox {
                    x0: b.x0.min(x),
                    y0: b.y0,
                    x1: b.x1.max(x),
                    y1: y,
                },
            });
        }
        bbox
    }

    /// Mean (x, y) of set pixels, `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("ones", &self.count_ones())
            .finish()
    }
}

/// Luma plane with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LumaPlane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl LumaPlane {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped to the plane.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

#[inline]
pub fn luma_of(rgb: [u8; 3]) -> f64 {
    (0.299 * f64::from(rgb[0]) + 0.587 * f64::from(rgb[1]) + 0.114 * f64::from(rgb[2])) / 255.0
}

/// BT.601 luma, `(0.299 R + 0.587 G + 0.114 B) / 255`, clamped to `[0, 1]`.
pub fn to_luma(frame: &Frame) -> LumaPlane {
    LumaPlane {
        width: frame.width,
        height: frame.height,
        data: frame.rgb_pixels().map(|p| luma_of(p).min(1.0)).collect(),
    }
}

/// `n` evenly spaced indices into a sequence of `frame_count` frames.
///
/// The first index is 0 and, for `n >= 2`, the last is `frame_count - 1`.
/// Duplicates produced when `n > frame_count` are removed.
pub fn sample_frames(frame_count: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(MediaError::ZeroSamples);
    }
    if frame_count == 0 {
        return Err(MediaError::NoFrames);
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let last = (frame_count - 1) as f64;
    let mut out: Vec<usize> = (0..n)
        .map(|i| (i as f64 * last / (n - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    Ok(out)
}

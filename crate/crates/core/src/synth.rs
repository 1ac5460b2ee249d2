//! Deterministic synthetic videos: solid-colour scenes with hard cuts,
//! noise textures, translating windows and moving sprites. Used by the
//! `synth` CLI subcommand and as test oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::media::{Fps, Frame, FrameSequence};

fn fps(n: u32) -> Fps {
    Fps::integer(n.max(1)).expect("positive fps")
}

/// Independent uniform RGB noise.
pub fn noise_frame(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..width * height * 3).map(|_| rng.gen()).collect();
    Frame::new(width, height, pixels).expect("valid dimensions")
}

/// Solid-colour scenes. Scene `k` starts at `starts[k]` and is filled with `colors[k]`.
pub fn color_cuts(
    width: usize,
    height: usize,
    len: usize,
    starts: &[usize],
    colors: &[[u8; 3]],
    fps_num: u32,
) -> FrameSequence {
    let frames = (0..len)
        .map(|i| {
            let k = starts.iter().rposition(|&s| s <= i).unwrap_or(0);
            Frame::filled(width, height, colors[k.min(colors.len() - 1)]).expect("valid dimensions")
        })
        .collect();
    FrameSequence::new(frames, fps(fps_num), "color-cuts").expect("non-empty")
}

/// `frame` translated by `(dx, dy)` with wrap-around: `out(x, y) = in(x - dx, y - dy)`.
pub fn wrap_shift(frame: &Frame, dx: isize, dy: isize) -> Frame {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    Frame::from_fn(frame.width(), frame.height(), |x, y| {
        let sx = (x as isize - dx).rem_euclid(w) as usize;
        let sy = (y as isize - dy).rem_euclid(h) as usize;
        frame.pixel(sx, sy)
    })
    .expect("same dimensions")
}

/// A `width` x `height` window sliding over a larger noise canvas at
/// `velocity` pixels per frame; content appears to move by `velocity`.
pub fn translating_noise(
    width: usize,
    height: usize,
    len: usize,
    velocity: (isize, isize),
    fps_num: u32,
    seed: u64,
) -> FrameSequence {
    let reach_x = velocity.0.unsigned_abs() * len;
    let reach_y = velocity.1.unsigned_abs() * len;
    let canvas = noise_frame(width + 2 * reach_x, height + 2 * reach_y, seed);
    let frames = (0..len)
        .map(|i| {
            let ox = reach_x as isize - velocity.0 * i as isize;
            let oy = reach_y as isize - velocity.1 * i as isize;
            Frame::from_fn(width, height, |x, y| {
                canvas.pixel((ox + x as isize) as usize, (oy + y as isize) as usize)
            })
            .expect("valid dimensions")
        })
        .collect();
    FrameSequence::new(frames, fps(fps_num), format!("translate-{seed}")).expect("non-empty")
}

/// Axis-aligned rectangle moving at constant velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sprite {
    pub x: isize,
    pub y: isize,
    pub width: usize,
    pub height: usize,
    pub velocity: (isize, isize),
    pub color: [u8; 3],
    /// When set, the sprite is filled with seeded noise instead of `color`.
    pub texture_seed: Option<u64>,
}

impl Sprite {
    pub fn solid(x: isize, y: isize, width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            x,
            y,
            width,
            height,
            velocity: (0, 0),
            color,
            texture_seed: None,
        }
    }

    pub fn moving(mut self, vx: isize, vy: isize) -> Self {
        self.velocity = (vx, vy);
        self
    }

    pub fn textured(mut self, seed: u64) -> Self {
        self.texture_seed = Some(seed);
        self
    }

    /// Top-left corner at frame `i`.
    pub fn position(&self, i: usize) -> (isize, isize) {
        (
            self.x + self.velocity.0 * i as isize,
            self.y + self.velocity.1 * i as isize,
        )
    }
}

/// Sprites drawn in order over a solid background.
pub fn sprite_frame(width: usize, height: usize, background: [u8; 3], sprites: &[(Sprite, (isize, isize))]) -> Frame {
    let textures: Vec<Option<Frame>> = sprites
        .iter()
        .map(|(s, _)| s.texture_seed.map(|seed| noise_frame(s.width, s.height, seed)))
        .collect();
    Frame::from_fn(width, height, |x, y| {
        let mut px = background;
        for ((s, (sx, sy)), tex) in sprites.iter().zip(&textures) {
            let (lx, ly) = (x as isize - sx, y as isize - sy);
            if lx >= 0 && ly >= 0 && (lx as usize) < s.width && (ly as usize) < s.height {
                px = match tex {
                    Some(t) => t.pixel(lx as usize, ly as usize),
                    None => s.color,
                };
            }
        }
        px
    })
    .expect("valid dimensions")
}

pub fn sprite_video(
    width: usize,
    height: usize,
    len: usize,
    background: [u8; 3],
    sprites: &[Sprite],
    fps_num: u32,
) -> FrameSequence {
    let frames = (0..len)
        .map(|i| {
            let placed: Vec<_> = sprites.iter().map(|s| (*s, s.position(i))).collect();
            sprite_frame(width, height, background, &placed)
        })
        .collect();
    FrameSequence::new(frames, fps(fps_num), "sprites").expect("non-empty")
}

/// Independent noise per frame.
pub fn noise_video(width: usize, height: usize, len: usize, fps_num: u32, seed: u64) -> FrameSequence {
    let frames = (0..len)
        .map(|i| noise_frame(width, height, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)))
        .collect();
    FrameSequence::new(frames, fps(fps_num), format!("noise-{seed}")).expect("non-empty")
}

/// Hue-separated palette colour `k` (fully saturated, 60 degree steps).
pub fn palette(k: usize) -> [u8; 3] {
    const COLORS: [[u8; 3]; 6] = [
        [230, 30, 30],
        [230, 230, 30],
        [30, 230, 30],
        [30, 230, 230],
        [30, 30, 230],
        [230, 30, 230],
    ];
    COLORS[k % COLORS.len()]
}

/// A multi-scene video: each scene has a palette background and a textured
/// sprite drifting at `speed` px/frame. Returns the sequence and the true
/// cut indices.
pub fn scene_video(
    width: usize,
    height: usize,
    scene_lengths: &[usize],
    speed: isize,
    fps_num: u32,
    seed: u64,
) -> (FrameSequence, Vec<usize>) {
    let mut frames = Vec::new();
    let mut cuts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut color_index = rng.gen_range(0..6);
    for (k, &len) in scene_lengths.iter().enumerate() {
        if k > 0 {
            cuts.push(frames.len());
            // skip two palette slots so consecutive backgrounds differ by >= 120 degrees
            color_index += 2 + rng.gen_range(0..3usize);
        }
        let sw = (width / 4).max(2);
        let sh = (height / 4).max(2);
        let sprite = Sprite::solid(
            rng.gen_range(0..(width - sw) as isize / 2),
            rng.gen_range(0..(height - sh) as isize),
            sw,
            sh,
            [0; 3],
        )
        .moving(speed, 0)
        .textured(rng.gen());
        // alternate bright and dark backgrounds so every cut also changes value
        let mut background = palette(color_index);
        if k % 2 == 1 {
            background = background.map(|c| (u16::from(c) * 2 / 5) as u8);
        }
        for i in 0..len {
            let mut pos = sprite.position(i);
            pos.0 = pos.0.rem_euclid((width - sw) as isize);
            frames.push(sprite_frame(width, height, background, &[(sprite, pos)]));
        }
    }
    let seq = FrameSequence::new(frames, fps(fps_num), format!("scenes-{seed}")).expect("non-empty");
    (seq, cuts)
}

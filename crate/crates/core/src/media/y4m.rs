//! YUV4MPEG2 demuxing into RGB frames, plus a C444 writer used for fixtures
//! and debugging.
//!
//! Colour conversion is BT.601. Samples are studio swing (Y in 16..=235)
//! unless the stream carries `XCOLORRANGE=FULL`; both map onto full-range
//! 0..=255 RGB. 4:2:0 chroma is upsampled by sample replication.

use super::{Fps, Frame, FrameSequence, MediaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ColorRange {
    #[default]
    Limited,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Chroma {
    C420,
    C444,
}

struct Header {
    width: usize,
    height: usize,
    fps: Fps,
    chroma: Chroma,
    range: ColorRange,
}

fn header_err(token: &str, reason: impl Into<String>) -> MediaError {
    MediaError::Header {
        token: token.to_string(),
        reason: reason.into(),
    }
}

fn parse_header(line: &str) -> Result<Header> {
    let mut tokens = line.split(' ').filter(|t| !t.is_empty());
    match tokens.next() {
        Some("YUV4MPEG2") => {}
        Some(t) => return Err(header_err(t, "expected stream magic YUV4MPEG2")),
        None => return Err(header_err("", "empty header")),
    }
    let (mut width, mut height, mut fps) = (None, None, None);
    let mut chroma = Chroma::C420;
    let mut range = ColorRange::Limited;
    for token in tokens {
        let (tag, value) = token.split_at(1);
        match tag {
            "W" | "H" => {
                let v: usize = value
                    .parse()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| header_err(token, "dimension must be a positive integer"))?;
                if tag == "W" {
                    width = Some(v);
                } else {
                    height = Some(v);
                }
            }
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| header_err(token, "frame rate must be num:den"))?;
                let (n, d) = n
                    .parse()
                    .ok()
                    .zip(d.parse().ok())
                    .ok_or_else(|| header_err(token, "frame rate must be num:den"))?;
                fps = Some(Fps::new(n, d).map_err(|_| header_err(token, "zero frame rate"))?);
            }
            "I" => {
                if !matches!(value, "p" | "t" | "b" | "m" | "?") {
                    return Err(header_err(token, "unknown interlacing mode"));
                }
            }
            "A" => {
                if value.split_once(':').is_none() {
                    return Err(header_err(token, "aspect ratio must be num:den"));
                }
            }
            "C" => {
                chroma = match value {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "444" => Chroma::C444,
                    _ => return Err(header_err(token, "unsupported colorspace (C420*, C444 only)")),
                }
            }
            "X" => match value {
                "COLORRANGE=FULL" => range = ColorRange::Full,
                "COLORRANGE=LIMITED" => range = ColorRange::Limited,
                _ => {}
            },
            _ => return Err(header_err(token, "unknown header tag")),
        }
    }
    Ok(Header {
        width: width.ok_or_else(|| header_err("W", "missing width"))?,
        height: height.ok_or_else(|| header_err("H", "missing height"))?,
        fps: fps.ok_or_else(|| header_err("F", "missing frame rate"))?,
        chroma,
        range,
    })
}

#[inline]
fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn yuv_to_rgb(y: u8, u: u8, v: u8, range: ColorRange) -> [u8; 3] {
    let (y, cb, cr) = match range {
        ColorRange::Limited => (
            (f64::from(y) - 16.0) * 255.0 / 219.0,
            (f64::from(u) - 128.0) * 255.0 / 224.0,
            (f64::from(v) - 128.0) * 255.0 / 224.0,
        ),
        ColorRange::Full => (f64::from(y), f64::from(u) - 128.0, f64::from(v) - 128.0),
    };
    [
        clamp_u8(y + 1.402 * cr),
        clamp_u8(y - 0.344_136 * cb - 0.714_136 * cr),
        clamp_u8(y + 1.772 * cb),
    ]
}

fn rgb_to_yuv(rgb: [u8; 3], range: ColorRange) -> [u8; 3] {
    let [r, g, b] = rgb.map(f64::from);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = -0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    match range {
        ColorRange::Limited => [
            clamp_u8(16.0 + y * 219.0 / 255.0),
            clamp_u8(128.0 + cb * 224.0 / 255.0),
            clamp_u8(128.0 + cr * 224.0 / 255.0),
        ],
        ColorRange::Full => [clamp_u8(y), clamp_u8(128.0 + cb), clamp_u8(128.0 + cr)],
    }
}

/// Parse a complete YUV4MPEG2 stream.
pub fn parse_y4m(bytes: &[u8]) -> Result<FrameSequence> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| header_err("", "header is not newline terminated"))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| header_err("", "header is not ASCII"))?;
    let header = parse_header(line)?;
    let (w, h) = (header.width, header.height);
    let (cw, ch) = match header.chroma {
        Chroma::C420 => (w.div_ceil(2), h.div_ceil(2)),
        Chroma::C444 => (w, h),
    };
    let frame_len = w * h + 2 * cw * ch;

    let mut frames = Vec::new();
    let mut pos = nl + 1;
    while pos < bytes.len() {
        let index = frames.len();
        let rest = &bytes[pos..];
        if !rest.starts_with(b"FRAME") {
            return Err(MediaError::BadFrameMarker { index });
        }
        let marker_end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(MediaError::TruncatedFrame {
                index,
                expected: frame_len,
                got: 0,
            })?;
        pos += marker_end + 1;
        let payload = &bytes[pos..];
        if payload.len() < frame_len {
            return Err(MediaError::TruncatedFrame {
                index,
                expected: frame_len,
                got: payload.len(),
            });
        }
        let (yp, rest) = payload[..frame_len].split_at(w * h);
        let (up, vp) = rest.split_at(cw * ch);
        let frame = Frame::from_fn(w, h, |x, y| {
            let ci = match header.chroma {
                Chroma::C420 => (y / 2) * cw + x / 2,
                Chroma::C444 => y * w + x,
            };
            yuv_to_rgb(yp[y * w + x], up[ci], vp[ci], header.range)
        })?;
        frames.push(frame);
        pos += frame_len;
    }
    if frames.is_empty() {
        return Err(MediaError::NoFrames);
    }
    FrameSequence::new(frames, header.fps, "y4m")
}

/// Serialize as a C444 stream.
pub fn write_y4m(seq: &FrameSequence, range: ColorRange) -> Vec<u8> {
    let (w, h) = (seq.width(), seq.height());
    let tag = match range {
        ColorRange::Limited => "LIMITED",
        ColorRange::Full => "FULL",
    };
    let fps = seq.fps();
    let mut out = format!(
        "YUV4MPEG2 W{w} H{h} F{}:{} Ip A1:1 C444 XCOLORRANGE={tag}\n",
        fps.num(),
        fps.den()
    )
    .into_bytes();
    for frame in seq.frames() {
        out.extend_from_slice(b"FRAME\n");
        let yuv: Vec<[u8; 3]> = frame.rgb_pixels().map(|p| rgb_to_yuv(p, range)).collect();
        for plane in 0..3 {
            out.extend(yuv.iter().map(|p| p[plane]));
        }
    }
    out
}

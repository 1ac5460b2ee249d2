//! Binary portable pixmap (P6, maxval 255) codec and frame directories.

use std::fs;
use std::path::Path;

use super::{Fps, Frame, FrameSequence, MediaError, Result};

fn ppm_err(path: &str, reason: impl Into<String>) -> MediaError {
    MediaError::Ppm {
        path: path.to_string(),
        reason: reason.into(),
    }
}

/// Decode a P6 image. `name` is only used in error messages.
pub fn decode_ppm(bytes: &[u8], name: &str) -> Result<Frame> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(ppm_err(name, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(ppm_err(name, format!("unsupported magic `{}`", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| ppm_err(name, format!("bad {what} `{s}`")))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(ppm_err(name, format!("maxval {maxval} is not 8-bit")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let need = width * height * 3;
    let raster = bytes.get(pos..pos + need).ok_or_else(|| {
        ppm_err(
            name,
            format!("raster truncated: need {need} bytes, have {}", bytes.len().saturating_sub(pos)),
        )
    })?;
    Frame::new(width, height, raster.to_vec()).map_err(|e| ppm_err(name, e.to_string()))
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

/// Read every `*.ppm` file in `dir`, ordered by file name.
pub fn read_frame_dir(dir: &Path, fps: Fps) -> Result<FrameSequence> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(MediaError::EmptyDir(dir.display().to_string()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        let name = path.display().to_string();
        let frame = decode_ppm(&fs::read(path)?, &name)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if first.dims() != frame.dims() {
                return Err(MediaError::DirDimensionMismatch {
                    path: name,
                    got_w: frame.width(),
                    got_h: frame.height(),
                    want_w: first.width(),
                    want_h: first.height(),
                });
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, fps, dir.display().to_string())
}

/// Write frames as `000000.ppm`, `000001.ppm`, ... into `dir` (created if missing).
pub fn write_frame_dir(seq: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, frame) in seq.frames().iter().enumerate() {
        fs::write(dir.join(format!("{i:06}.ppm")), encode_ppm(frame))?;
    }
    Ok(())
}

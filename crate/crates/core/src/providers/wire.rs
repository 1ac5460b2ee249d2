//! Line-delimited JSON protocol spoken between [`super::RemoteProvider`] and
//! provider processes.
//!
//! Each request is one line `{"id": u64, "op": str, "payload": {...}}` and is
//! answered by one line `{"id": u64, "ok": true, "result": {...}}` or
//! `{"id": u64, "ok": false, "error": str}`. Images travel as base64 binary
//! PPM, masks as base64 row-major bits (most significant bit first) and
//! videos as a path to a `.y4m` file or a directory of `.ppm` frames.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CaptionRequest, Embedding, ModelProvider, ProviderError, Result};
use crate::media::{decode_ppm, encode_ppm, parse_y4m, read_frame_dir, BinaryMask, Fps, Frame, FrameSequence};

pub const OPS: [&str; 8] = [
    "embed_video",
    "embed_text",
    "embed_image",
    "caption",
    "char_masks",
    "score_smoothness",
    "score_aesthetic",
    "score_regression",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn success(id: u64, result: Value) -> Self {
        Self {
            id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn failure(id: u64, error: impl Into<String>) -> Self {
        Self {
            id,
            ok: false,
            result: None,
            error: Some(error.into()),
        }
    }
}

/// A video passed by reference: a `.y4m` file or a directory of `.ppm` frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub path: PathBuf,
    pub fps: Fps,
    #[serde(default)]
    pub source_id: String,
}

#[derive(Serialize, Deserialize)]
struct WireMask {
    width: usize,
    height: usize,
    bits: String,
}

fn invalid(e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Invalid(e.to_string())
}

pub fn encode_frame(frame: &Frame) -> String {
    B64.encode(encode_ppm(frame))
}

pub fn decode_frame(text: &str) -> Result<Frame> {
    let bytes = B64.decode(text).map_err(invalid)?;
    decode_ppm(&bytes, "payload").map_err(invalid)
}

pub fn encode_mask(mask: &BinaryMask) -> Value {
    let mut packed = vec![0u8; mask.bits().len().div_ceil(8)];
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, &b)| b) {
        packed[i / 8] |= 0x80 >> (i % 8);
    }
    json!(WireMask {
        width: mask.width(),
        height: mask.height(),
        bits: B64.encode(packed),
    })
}

pub fn decode_mask(value: &Value) -> Result<BinaryMask> {
    let wire: WireMask = serde_json::from_value(value.clone()).map_err(invalid)?;
    let packed = B64.decode(&wire.bits).map_err(invalid)?;
    let n = wire.width * wire.height;
    if packed.len() != n.div_ceil(8) {
        return Err(invalid(format!("mask needs {} packed bytes, got {}", n.div_ceil(8), packed.len())));
    }
    let bits = (0..n).map(|i| packed[i / 8] & (0x80 >> (i % 8)) != 0).collect();
    BinaryMask::new(wire.width, wire.height, bits).map_err(invalid)
}

pub fn load_video(video: &VideoRef) -> Result<FrameSequence> {
    let seq = if video.path.is_dir() {
        read_frame_dir(&video.path, video.fps).map_err(invalid)?
    } else {
        let bytes = std::fs::read(&video.path).map_err(|e| invalid(format!("{}: {e}", video.path.display())))?;
        parse_y4m(&bytes).map_err(invalid)?
    };
    let frames = seq.frames().to_vec();
    FrameSequence::new(frames, video.fps, video.source_id.clone()).map_err(invalid)
}

fn field<'a>(payload: &'a Value, key: &str) -> Result<&'a Value> {
    payload
        .get(key)
        .ok_or_else(|| invalid(format!("payload is missing `{key}`")))
}

fn str_field<'a>(payload: &'a Value, key: &str) -> Result<&'a str> {
    field(payload, key)?
        .as_str()
        .ok_or_else(|| invalid(format!("`{key}` must be a string")))
}

fn embedding_field(payload: &Value, key: &str) -> Result<Embedding> {
    serde_json::from_value(field(payload, key)?.clone()).map_err(invalid)
}

fn video_field(payload: &Value) -> Result<FrameSequence> {
    let video: VideoRef = serde_json::from_value(field(payload, "video")?.clone()).map_err(invalid)?;
    load_video(&video)
}

/// Execute one request against an in-process provider.
pub fn dispatch(provider: &dyn ModelProvider, op: &str, payload: &Value) -> Result<Value> {
    match op {
        "embed_video" => Ok(json!({ "embedding": provider.embed_video(&video_field(payload)?)? })),
        "embed_text" => Ok(json!({ "embedding": provider.embed_text(str_field(payload, "text")?)? })),
        "embed_image" => {
            let frame = decode_frame(str_field(payload, "image")?)?;
            Ok(json!({ "embedding": provider.embed_image(&frame)? }))
        }
        "caption" => {
            let request: CaptionRequest = serde_json::from_value(payload.clone()).map_err(invalid)?;
            Ok(json!({ "caption": provider.caption(&request)? }))
        }
        "char_masks" => {
            let frame = decode_frame(str_field(payload, "image")?)?;
            let masks: Vec<Value> = provider.char_masks(&frame)?.iter().map(encode_mask).collect();
            Ok(json!({ "masks": masks }))
        }
        "score_smoothness" => Ok(json!({ "score": provider.score_smoothness(&video_field(payload)?)? })),
        "score_aesthetic" => {
            let embedding = embedding_field(payload, "embedding")?;
            let frame = decode_frame(str_field(payload, "image")?)?;
            Ok(json!({ "score": provider.score_aesthetic(&embedding, &frame)? }))
        }
        "score_regression" => {
            let a = embedding_field(payload, "a")?;
            let b = embedding_field(payload, "b")?;
            Ok(json!({ "score": provider.score_regression(&a, &b)? }))
        }
        other => Err(ProviderError::Unsupported(other.to_string())),
    }
}

/// Answer one raw request line. Malformed requests get an error response
/// carrying whatever id could be recovered (0 otherwise).
pub fn handle_line(provider: &dyn ModelProvider, line: &str) -> Response {
    let request: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(Value::as_u64))
                .unwrap_or(0);
            return Response::failure(id, format!("malformed request: {e}"));
        }
    };
    match dispatch(provider, &request.op, &request.payload) {
        Ok(result) => Response::success(request.id, result),
        Err(e) => Response::failure(request.id, e.to_string()),
    }
}

/// Serve requests from `reader` until end of input, one response line per request.
pub fn serve(provider: &dyn ModelProvider, reader: impl BufRead, mut writer: impl Write) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_line(provider, &line);
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Accept TCP connections forever, serving each on its own thread.
pub fn serve_tcp(provider: std::sync::Arc<dyn ModelProvider>, listener: std::net::TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let provider = provider.clone();
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => std::io::BufReader::new(s),
                Err(e) => {
                    log::warn!("tcp provider connection: {e}");
                    return;
                }
            };
            if let Err(e) = serve(provider.as_ref(), reader, stream) {
                log::warn!("tcp provider connection closed: {e}");
            }
        });
    }
    Ok(())
}

/// Helpers for building request payloads on the client side.
pub(crate) fn video_payload(video: &VideoRef) -> Value {
    json!({ "video": video })
}

pub(crate) fn image_payload(frame: &Frame) -> Value {
    json!({ "image": encode_frame(frame) })
}

pub(crate) fn result_field<'a>(result: &'a Value, key: &str) -> Result<&'a Value> {
    result
        .get(key)
        .ok_or_else(|| ProviderError::Protocol(format!("result is missing `{key}`")))
}

pub(crate) fn result_embedding(result: &Value) -> Result<Embedding> {
    serde_json::from_value(result_field(result, "embedding")?.clone())
        .map_err(|e| ProviderError::Protocol(format!("bad embedding: {e}")))
}

pub(crate) fn result_score(result: &Value) -> Result<f64> {
    let score = result_field(result, "score")?
        .as_f64()
        .ok_or_else(|| ProviderError::Protocol("`score` must be a number".into()))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ProviderError::Protocol(format!("score {score} outside [0, 1]")));
    }
    Ok(score)
}

pub(crate) fn spill_video(seq: &FrameSequence, dir: &Path) -> Result<VideoRef> {
    crate::media::write_frame_dir(seq, dir).map_err(|e| ProviderError::Transport(format!("spilling video: {e}")))?;
    Ok(VideoRef {
        path: dir.to_path_buf(),
        fps: seq.fps(),
        source_id: seq.source_id().to_string(),
    })
}

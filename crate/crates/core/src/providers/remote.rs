//! Client side of the provider protocol over a child process or a TCP socket.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::wire::{self, Request, Response};
use super::{CaptionRequest, Embedding, ModelProvider, ProviderError, Result};
use crate::media::{BinaryMask, Frame, FrameSequence};

/// Where a provider lives: `ref` (in-process), `cmd:<shell command>` or `tcp://host:port`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Reference,
    Command(String),
    Tcp(String),
}

impl FromStr for Endpoint {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ref" {
            Ok(Endpoint::Reference)
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err(ProviderError::Invalid("empty provider command".into()));
            }
            Ok(Endpoint::Command(cmd.to_string()))
        } else if let Some(addr) = s.strip_prefix("tcp://") {
            Ok(Endpoint::Tcp(addr.to_string()))
        } else {
            Err(ProviderError::Invalid(format!(
                "endpoint `{s}` must be `ref`, `cmd:<command>` or `tcp://host:port`"
            )))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Reference => f.write_str("ref"),
            Endpoint::Command(c) => write!(f, "cmd:{c}"),
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteOptions {
    pub timeout: Duration,
    /// Extra attempts after a timeout or transport failure.
    pub retries: u32,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            retries: 1,
        }
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            // the command runs under `sh` in its own process group; take the
            // whole group down so grandchildren do not keep our pipes open
            #[cfg(unix)]
            {
                let _ = Command::new("kill")
                    .args(["-KILL", "--", &format!("-{}", child.id())])
                    .stdout(Stdio::null())
                    .stderr(Stdio::null())
                    .status();
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn spawn_reader(source: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => {
                    let _ = tx.send(Err(std::io::ErrorKind::UnexpectedEof.into()));
                    return;
                }
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            }
        }
    });
    rx
}

impl Connection {
    fn open(endpoint: &Endpoint) -> Result<Self> {
        match endpoint {
            Endpoint::Reference => Err(ProviderError::Invalid("`ref` is not a remote endpoint".into())),
            Endpoint::Command(cmd) => {
                let mut command = Command::new("sh");
                command.arg("-c").arg(cmd);
                #[cfg(unix)]
                std::os::unix::process::CommandExt::process_group(&mut command, 0);
                let mut child = command
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| ProviderError::Transport(format!("spawning `{cmd}`: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self {
                    writer: Box::new(stdin),
                    lines: spawn_reader(stdout),
                    child: Some(child),
                })
            }
            Endpoint::Tcp(addr) => {
                let stream =
                    TcpStream::connect(addr).map_err(|e| ProviderError::Transport(format!("connecting {addr}: {e}")))?;
                let reader = stream
                    .try_clone()
                    .map_err(|e| ProviderError::Transport(e.to_string()))?;
                Ok(Self {
                    writer: Box::new(stream),
                    lines: spawn_reader(reader),
                    child: None,
                })
            }
        }
    }
}

/// A provider reached over the wire protocol. One connection is shared and
/// requests on it are serialized; create one instance per worker for
/// parallel traffic.
pub struct RemoteProvider {
    endpoint: Endpoint,
    options: RemoteOptions,
    connection: Mutex<Option<Connection>>,
    next_id: AtomicU64,
}

impl RemoteProvider {
    pub fn new(endpoint: Endpoint, options: RemoteOptions) -> Result<Self> {
        if endpoint == Endpoint::Reference {
            return Err(ProviderError::Invalid("`ref` is not a remote endpoint".into()));
        }
        Ok(Self {
            endpoint,
            options,
            connection: Mutex::new(None),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn attempt(&self, op: &str, payload: &Value) -> Result<Value> {
        let mut guard = self.connection.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Connection::open(&self.endpoint)?);
        }
        let result = Self::exchange(
            guard.as_mut().expect("connection opened"),
            self.next_id.fetch_add(1, Ordering::Relaxed),
            op,
            payload,
            self.options.timeout,
        );
        if result.is_err() {
            // the stream may hold a late or partial reply; never reuse it
            *guard = None;
        }
        match result? {
            Response { ok: true, result: Some(v), .. } => Ok(v),
            Response { ok: true, result: None, .. } => Err(ProviderError::Protocol("ok response without result".into())),
            Response { error, .. } => Err(ProviderError::Remote(error.unwrap_or_else(|| "unspecified error".into()))),
        }
    }

    fn exchange(conn: &mut Connection, id: u64, op: &str, payload: &Value, timeout: Duration) -> Result<Response> {
        let request = Request {
            id,
            op: op.to_string(),
            payload: payload.clone(),
        };
        let mut line = serde_json::to_string(&request).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        line.push('\n');
        conn.writer
            .write_all(line.as_bytes())
            .and_then(|_| conn.writer.flush())
            .map_err(|e| ProviderError::Transport(format!("sending request: {e}")))?;
        let reply = match conn.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(ProviderError::Transport(format!("provider closed the stream: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(ProviderError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(ProviderError::Transport("provider closed the stream".into()))
            }
        };
        let response: Response = serde_json::from_str(reply.trim_end())
            .map_err(|e| ProviderError::Protocol(format!("malformed response: {e}")))?;
        if response.id != id {
            return Err(ProviderError::Protocol(format!(
                "response id {} does not match request id {id}",
                response.id
            )));
        }
        Ok(response)
    }

    /// Send one request, retrying timeouts and transport failures on a fresh connection.
    pub fn call(&self, op: &str, payload: &Value) -> Result<Value> {
        let mut attempt = 0;
        loop {
            match self.attempt(op, payload) {
                Err(e) if e.is_retryable() && attempt < self.options.retries => {
                    attempt += 1;
                    log::warn!("provider {} {op}: {e}; retry {attempt}/{}", self.endpoint, self.options.retries);
                }
                other => return other,
            }
        }
    }

    fn with_video<T>(&self, seq: &FrameSequence, f: impl FnOnce(Value) -> Result<T>) -> Result<T> {
        let dir = tempfile::tempdir().map_err(|e| ProviderError::Transport(format!("temp dir: {e}")))?;
        let video = wire::spill_video(seq, dir.path())?;
        f(wire::video_payload(&video))
    }
}

impl ModelProvider for RemoteProvider {
    fn name(&self) -> String {
        self.endpoint.to_string()
    }

    fn embed_video(&self, seq: &FrameSequence) -> Result<Embedding> {
        self.with_video(seq, |p| wire::result_embedding(&self.call("embed_video", &p)?))
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        wire::result_embedding(&self.call("embed_text", &json!({ "text": text }))?)
    }

    fn embed_image(&self, frame: &Frame) -> Result<Embedding> {
        wire::result_embedding(&self.call("embed_image", &wire::image_payload(frame))?)
    }

    fn caption(&self, request: &CaptionRequest) -> Result<String> {
        let payload = serde_json::to_value(request).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        let result = self.call("caption", &payload)?;
        wire::result_field(&result, "caption")?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Protocol("`caption` must be a string".into()))
    }

    fn char_masks(&self, frame: &Frame) -> Result<Vec<BinaryMask>> {
        let result = self.call("char_masks", &wire::image_payload(frame))?;
        let masks = wire::result_field(&result, "masks")?
            .as_array()
            .ok_or_else(|| ProviderError::Protocol("`masks` must be an array".into()))?;
        masks
            .iter()
            .map(|m| {
                let mask = wire::decode_mask(m).map_err(|e| ProviderError::Protocol(e.to_string()))?;
                mask.check_dims(frame.width(), frame.height())
                    .map_err(|e| ProviderError::Protocol(e.to_string()))?;
                Ok(mask)
            })
            .collect()
    }

    fn score_smoothness(&self, seq: &FrameSequence) -> Result<f64> {
        self.with_video(seq, |p| wire::result_score(&self.call("score_smoothness", &p)?))
    }

    fn score_aesthetic(&self, embedding: &Embedding, frame: &Frame) -> Result<f64> {
        let mut payload = wire::image_payload(frame);
        payload["embedding"] = json!(embedding);
        wire::result_score(&self.call("score_aesthetic", &payload)?)
    }

    fn score_regression(&self, a: &Embedding, b: &Embedding) -> Result<f64> {
        wire::result_score(&self.call("score_regression", &json!({ "a": a, "b": b }))?)
    }
}

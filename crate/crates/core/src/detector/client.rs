use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};

use super::protocol::{extract_id, DetectorRequest, DetectorResponse, Handshake, PROTOCOL_VERSION};
use super::{Detector, DetectorCapabilities, DetectorError};
use crate::detection::Detection;
use crate::raster::ImageRaster;

type Reply = Result<DetectorResponse, DetectorError>;

const STDERR_TAIL: usize = 20;

#[derive(Default)]
struct State {
    pending: HashMap<u64, Sender<Reply>>,
    /// Set once the stream is unusable; every later call fails with it.
    broken: Option<DetectorError>,
}

impl State {
    fn fail_all(&mut self, err: DetectorError) {
        for (_, tx) in self.pending.drain() {
            let _ = tx.send(Err(err.clone()));
        }
        self.broken.get_or_insert(err);
    }
}

/// Client for a detector speaking the line protocol, typically a child process.
///
/// Requests are pipelined over one duplex stream: any number of threads may
/// call [`ProtocolClient::detect`] at once, and responses are routed back by
/// `id` in whatever order they arrive.
pub struct ProtocolClient {
    handshake: Handshake,
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    state: Arc<Mutex<State>>,
    next_id: AtomicU64,
    timeout: Duration,
    child: Option<Mutex<Child>>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    reader: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for ProtocolClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProtocolClient")
            .field("handshake", &self.handshake)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ProtocolClient {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    /// Spawn `command_line` (shell-style quoting, no shell) and complete the handshake.
    pub fn spawn(command_line: &str) -> Result<Self, DetectorError> {
        let argv = shlex::split(command_line)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| DetectorError::InvalidInput(format!("cannot parse command line {command_line:?}")))?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        Self::spawn_command(cmd)
    }

    pub fn spawn_command(mut cmd: Command) -> Result<Self, DetectorError> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| DetectorError::Transport {
                message: format!("failed to start detector {cmd:?}: {e}"),
                retryable: false,
            })?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let stderr = child.stderr.take().expect("piped");
        let tail = Arc::new(Mutex::new(VecDeque::new()));
        {
            let tail = Arc::clone(&tail);
            std::thread::spawn(move || {
                for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                    debug!("detector stderr: {line}");
                    let mut t = tail.lock().expect("stderr tail");
                    if t.len() == STDERR_TAIL {
                        t.pop_front();
                    }
                    t.push_back(line);
                }
            });
        }
        let mut client = Self::connect(BufReader::new(stdout), stdin, Self::DEFAULT_TIMEOUT, tail.clone());
        match &mut client {
            Ok(c) => c.child = Some(Mutex::new(child)),
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
        client
    }

    /// Connect over arbitrary streams (in-process servers, tests).
    pub fn from_streams<R, W>(reader: R, writer: W) -> Result<Self, DetectorError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::connect(BufReader::new(reader), writer, Self::DEFAULT_TIMEOUT, Arc::default())
    }

    fn connect<R, W>(
        mut reader: BufReader<R>,
        writer: W,
        timeout: Duration,
        stderr_tail: Arc<Mutex<VecDeque<String>>>,
    ) -> Result<Self, DetectorError>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        let handshake_reader = std::thread::spawn(move || {
            let mut line = String::new();
            let res = reader.read_line(&mut line);
            let _ = tx.send(res.map(|n| (n, line)));
            reader
        });
        let diag = |msg: String| {
            let tail: Vec<String> = stderr_tail.lock().expect("stderr tail").iter().cloned().collect();
            if tail.is_empty() {
                msg
            } else {
                format!("{msg}; detector stderr: {}", tail.join(" | "))
            }
        };
        let line = match rx.recv_timeout(timeout) {
            Ok(Ok((0, _))) => {
                std::thread::sleep(Duration::from_millis(50));
                return Err(DetectorError::Transport {
                    message: diag("detector exited before handshake".into()),
                    retryable: false,
                });
            }
            Ok(Ok((_, line))) => line,
            Ok(Err(e)) => return Err(DetectorError::transport(diag(format!("reading handshake: {e}")))),
            Err(_) => return Err(DetectorError::transport(diag("timed out waiting for handshake".into()))),
        };
        let value: serde_json::Value = serde_json::from_str(line.trim())
            .map_err(|e| DetectorError::Protocol(format!("handshake is not JSON: {e}")))?;
        if let Some(err) = value.get("error") {
            return Err(DetectorError::Transport {
                message: diag(format!("detector failed to start: {err}")),
                retryable: false,
            });
        }
        let handshake: Handshake =
            serde_json::from_value(value).map_err(|e| DetectorError::Protocol(format!("bad handshake: {e}")))?;
        if handshake.protocol_version != PROTOCOL_VERSION {
            return Err(DetectorError::Protocol(format!(
                "unsupported protocol version {}",
                handshake.protocol_version
            )));
        }
        if !(0.0..=1.0).contains(&handshake.confidence_threshold) {
            return Err(DetectorError::Protocol(format!(
                "confidence_threshold {} outside [0, 1]",
                handshake.confidence_threshold
            )));
        }
        let reader = handshake_reader.join().expect("handshake reader");

        let state = Arc::new(Mutex::new(State::default()));
        let reader_state = Arc::clone(&state);
        let reader_tail = Arc::clone(&stderr_tail);
        let reader = std::thread::spawn(move || read_loop(reader, reader_state, reader_tail));
        Ok(Self {
            handshake,
            writer: Mutex::new(Some(Box::new(writer))),
            state,
            next_id: AtomicU64::new(0),
            timeout,
            child: None,
            stderr_tail,
            reader: Some(reader),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    /// Send one request; the returned receiver yields its response.
    fn submit(&self, img: &ImageRaster) -> Result<(u64, Receiver<Reply>), DetectorError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = mpsc::channel();
        {
            let mut st = self.state.lock().expect("client state");
            if let Some(err) = &st.broken {
                return Err(self.with_exit_status(err.clone()));
            }
            st.pending.insert(id, tx);
        }
        let mut line = serde_json::to_vec(&DetectorRequest::encode(id, img)).expect("request serializes");
        line.push(b'\n');
        let written = {
            let mut w = self.writer.lock().expect("client writer");
            match w.as_mut() {
                Some(w) => w.write_all(&line).and_then(|_| w.flush()),
                None => Err(std::io::Error::other("client closed")),
            }
        };
        if let Err(e) = written {
            self.state.lock().expect("client state").pending.remove(&id);
            return Err(self.with_exit_status(DetectorError::transport(format!("writing request: {e}"))));
        }
        Ok((id, rx))
    }

    pub fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        let (id, rx) = self.submit(img)?;
        let response = match rx.recv_timeout(self.timeout) {
            Ok(r) => r.map_err(|e| self.with_exit_status(e))?,
            Err(RecvTimeoutError::Timeout) => {
                self.state.lock().expect("client state").pending.remove(&id);
                return Err(DetectorError::transport(format!(
                    "no response to request {id} within {:?}",
                    self.timeout
                )));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.with_exit_status(DetectorError::transport("detector connection lost")));
            }
        };
        if let Some(err) = response.error {
            return Err(DetectorError::Protocol(format!("detector reported error for request {id}: {err}")));
        }
        response
            .detections
            .iter()
            .map(|d| d.to_detection(img.width(), img.height()))
            .collect()
    }

    fn with_exit_status(&self, err: DetectorError) -> DetectorError {
        let DetectorError::Transport { message, retryable } = err else {
            return err;
        };
        let mut message = message;
        if let Some(child) = &self.child {
            if let Ok(Some(status)) = child.lock().expect("child").try_wait() {
                message.push_str(&format!("; detector exited with {status}"));
            }
        }
        let tail: Vec<String> = self.stderr_tail.lock().expect("stderr tail").iter().cloned().collect();
        if !tail.is_empty() {
            message.push_str(&format!("; detector stderr: {}", tail.join(" | ")));
        }
        DetectorError::Transport { message, retryable }
    }
}

fn read_loop<R: Read>(reader: BufReader<R>, state: Arc<Mutex<State>>, _tail: Arc<Mutex<VecDeque<String>>>) {
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                state
                    .lock()
                    .expect("client state")
                    .fail_all(DetectorError::transport(format!("reading detector output: {e}")));
                return;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut st = state.lock().expect("client state");
        match serde_json::from_str::<DetectorResponse>(&line) {
            Ok(resp) => match st.pending.remove(&resp.id) {
                Some(tx) => {
                    let _ = tx.send(Ok(resp));
                }
                None => {
                    warn!("detector answered unknown request id {}", resp.id);
                    st.fail_all(DetectorError::Protocol(format!("response id {} matches no request", resp.id)));
                }
            },
            Err(e) => match extract_id(&line).and_then(|id| st.pending.remove(&id)) {
                Some(tx) => {
                    let _ = tx.send(Err(DetectorError::Protocol(format!("malformed response: {e}"))));
                }
                None => st.fail_all(DetectorError::Protocol(format!("malformed response line: {e}"))),
            },
        }
    }
    state
        .lock()
        .expect("client state")
        .fail_all(DetectorError::transport("detector closed its output"));
}

impl Detector for ProtocolClient {
    fn capabilities(&self) -> DetectorCapabilities {
        self.handshake.capabilities()
    }

    fn detect(&self, img: &ImageRaster) -> Result<Vec<Detection>, DetectorError> {
        ProtocolClient::detect(self, img)
    }
}

impl Drop for ProtocolClient {
    fn drop(&mut self) {
        // closing stdin asks a well-behaved detector to exit
        self.writer.lock().map(|mut w| w.take()).ok();
        if let Some(child) = &self.child {
            let mut child = child.lock().expect("child");
            let deadline = std::time::Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if std::time::Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
        if let Some(h) = self.reader.take() {
            if self.child.is_some() {
                let _ = h.join();
            }
        }
    }
}

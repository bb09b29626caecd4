use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::protocol::{encode_request, parse_response, DetectionRequest, DetectionResponse, MAX_LINE_BYTES};
use super::BridgeError;

/// How to reach a detector: `tcp://host:port`, or `exec:program args...`
/// to spawn one and talk over its stdin/stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Endpoint {
    Tcp(String),
    Exec(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = BridgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(BridgeError::BadEndpoint(s.to_string()));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(BridgeError::BadEndpoint(s.to_string()));
            }
            Ok(Endpoint::Exec(argv))
        } else {
            Err(BridgeError::BadEndpoint(s.to_string()))
        }
    }
}

impl TryFrom<String> for Endpoint {
    type Error = BridgeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            Endpoint::Exec(argv) => write!(f, "exec:{}", argv.join(" ")),
        }
    }
}

type Line = Result<String, BridgeError>;

fn spawn_reader<R: Read + Send + 'static>(source: R) -> Receiver<Line> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut buf = Vec::new();
            let limit = MAX_LINE_BYTES as u64 + 1;
            let n = match reader.by_ref().take(limit).read_until(b'\n', &mut buf) {
                Ok(n) => n,
                Err(e) => {
                    let _ = tx.send(Err(BridgeError::Io(e.to_string())));
                    return;
                }
            };
            if n == 0 {
                let _ = tx.send(Err(BridgeError::Closed));
                return;
            }
            if buf.len() > MAX_LINE_BYTES || !buf.ends_with(b"\n") && buf.len() as u64 == limit {
                let _ = tx.send(Err(BridgeError::PayloadTooLarge(buf.len())));
                return;
            }
            let msg = String::from_utf8(buf).map_err(|e| BridgeError::Malformed(e.to_string()));
            if tx.send(msg).is_err() {
                return;
            }
        }
    });
    rx
}

/// Client for one detector connection. Requests may be pipelined; replies
/// are matched to requests by id, in whatever order they arrive.
pub struct DetectorClient {
    writer: Box<dyn Write + Send>,
    replies: Receiver<Line>,
    outstanding: HashSet<u64>,
    used_ids: HashSet<u64>,
    early: HashMap<u64, Result<DetectionResponse, BridgeError>>,
    child: Option<Child>,
    next_id: u64,
}

impl fmt::Debug for DetectorClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DetectorClient")
            .field("outstanding", &self.outstanding)
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl DetectorClient {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, BridgeError> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let addrs: Vec<_> = std::net::ToSocketAddrs::to_socket_addrs(addr.as_str())
                    .map_err(|e| BridgeError::Io(e.to_string()))?
                    .collect();
                let mut last = BridgeError::BadEndpoint(addr.clone());
                for a in addrs {
                    match TcpStream::connect_timeout(&a, timeout) {
                        Ok(stream) => {
                            let _ = stream.set_nodelay(true);
                            let read = stream.try_clone().map_err(|e| BridgeError::Io(e.to_string()))?;
                            return Ok(Self::from_parts(Box::new(stream), spawn_reader(read), None));
                        }
                        Err(e) => last = BridgeError::Io(e.to_string()),
                    }
                }
                Err(last)
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| BridgeError::Io(format!("spawning {}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self::from_parts(Box::new(stdin), spawn_reader(stdout), Some(child)))
            }
        }
    }

    /// Wraps an already-open byte stream pair.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::from_parts(Box::new(writer), spawn_reader(reader), None)
    }

    fn from_parts(writer: Box<dyn Write + Send>, replies: Receiver<Line>, child: Option<Child>) -> Self {
        DetectorClient {
            writer,
            replies,
            outstanding: HashSet::new(),
            used_ids: HashSet::new(),
            early: HashMap::new(),
            child,
            next_id: 1,
        }
    }

    /// A fresh id not yet used on this connection.
    pub fn next_id(&mut self) -> u64 {
        while self.used_ids.contains(&self.next_id) {
            self.next_id += 1;
        }
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Sends a request without waiting. Each id may be sent once per
    /// connection.
    pub fn send(&mut self, req: &DetectionRequest) -> Result<(), BridgeError> {
        if !self.used_ids.insert(req.id) {
            return Err(BridgeError::DuplicateId(req.id));
        }
        let line = encode_request(req)?;
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| BridgeError::Io(e.to_string()))?;
        self.outstanding.insert(req.id);
        Ok(())
    }

    /// Waits for the reply to `id`, buffering replies to other outstanding
    /// requests.
    pub fn receive(&mut self, id: u64, timeout: Duration) -> Result<DetectionResponse, BridgeError> {
        if let Some(r) = self.early.remove(&id) {
            self.outstanding.remove(&id);
            return r;
        }
        if !self.outstanding.contains(&id) {
            return Err(BridgeError::IdMismatch { expected: id, got: None });
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.replies.recv_timeout(left) {
                Ok(line) => line?,
                Err(RecvTimeoutError::Timeout) => return Err(BridgeError::Timeout(id)),
                Err(RecvTimeoutError::Disconnected) => return Err(BridgeError::Closed),
            };
            let (got, reply) = match parse_response(&line) {
                Ok(r) => (r.id, Ok(r)),
                Err(BridgeError::Remote { id: rid, message }) => {
                    (rid, Err(BridgeError::Remote { id: rid, message }))
                }
                Err(e) => return Err(e),
            };
            if got == id {
                self.outstanding.remove(&id);
                return reply;
            }
            if self.outstanding.contains(&got) && !self.early.contains_key(&got) {
                self.early.insert(got, reply);
            } else {
                return Err(BridgeError::IdMismatch { expected: id, got: Some(got) });
            }
        }
    }

    pub fn query(&mut self, req: &DetectionRequest, timeout: Duration) -> Result<DetectionResponse, BridgeError> {
        self.send(req)?;
        self.receive(req.id, timeout)
    }
}

impl Drop for DetectorClient {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// One-shot query over a fresh connection.
pub fn query_detector(
    endpoint: &Endpoint,
    req: &DetectionRequest,
    timeout: Duration,
) -> Result<DetectionResponse, BridgeError> {
    let mut client = DetectorClient::connect(endpoint, timeout)?;
    client.query(req, timeout)
}

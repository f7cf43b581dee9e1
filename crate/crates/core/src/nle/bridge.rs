//! Byte-stream bridge to an out-of-process denoiser.
//!
//! Request frame (little-endian throughout):
//!
//! ```text
//! "OAMPNLE1" | u64 N | f64 t* | f64 v | N × f32
//! ```
//!
//! Response frame:
//!
//! ```text
//! "OAMPNLE2" | u64 N | N × f32
//! ```

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REQUEST_MAGIC: &[u8; 8] = b"OAMPNLE1";
pub const RESPONSE_MAGIC: &[u8; 8] = b"OAMPNLE2";

/// Largest payload accepted from a peer, in elements.
pub const MAX_FRAME_LEN: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeRequest {
    pub t_star: f64,
    pub v: f64,
    pub payload: Vec<f32>,
}

pub fn encode_request(t_star: f64, v: f64, s_in: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + 4 * s_in.len());
    buf.extend_from_slice(REQUEST_MAGIC);
    buf.extend_from_slice(&(s_in.len() as u64).to_le_bytes());
    buf.extend_from_slice(&t_star.to_le_bytes());
    buf.extend_from_slice(&v.to_le_bytes());
    for &x in s_in {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    buf
}

pub fn encode_response(payload: &[f32]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 4 * payload.len());
    buf.extend_from_slice(RESPONSE_MAGIC);
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for &x in payload {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> io::Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_payload<R: Read>(r: &mut R, len: u64) -> Result<Vec<f32>> {
    if len > MAX_FRAME_LEN {
        return Err(Error::Bridge(format!("frame length {len} exceeds limit")));
    }
    let mut bytes = vec![0u8; 4 * len as usize];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Bridge(format!("truncated payload: {e}")))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Reads one request. `Ok(None)` on a clean end of stream.
pub fn read_request<R: Read>(r: &mut R) -> Result<Option<BridgeRequest>> {
    let magic = match read_array::<8, _>(r) {
        Ok(m) => m,
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if &magic != REQUEST_MAGIC {
        return Err(Error::Bridge(format!("bad request magic {magic:?}")));
    }
    let len = u64::from_le_bytes(read_array::<8, _>(r)?);
    let t_star = f64::from_le_bytes(read_array::<8, _>(r)?);
    let v = f64::from_le_bytes(read_array::<8, _>(r)?);
    let payload = read_payload(r, len)?;
    Ok(Some(BridgeRequest { t_star, v, payload }))
}

pub fn read_response<R: Read>(r: &mut R) -> Result<Vec<f32>> {
    let magic = read_array::<8, _>(r).map_err(|e| Error::Bridge(format!("no response: {e}")))?;
    if &magic != RESPONSE_MAGIC {
        return Err(Error::Bridge(format!("bad response magic {magic:?}")));
    }
    let len = u64::from_le_bytes(read_array::<8, _>(r)?);
    read_payload(r, len)
}

/// Answers requests until the input closes.
pub fn serve<R, W, F>(reader: R, writer: W, mut handler: F) -> Result<u64>
where
    R: Read,
    W: Write,
    F: FnMut(&BridgeRequest) -> Vec<f32>,
{
    let mut r = BufReader::new(reader);
    let mut w = BufWriter::new(writer);
    let mut served = 0;
    while let Some(req) = read_request(&mut r)? {
        let out = handler(&req);
        w.write_all(&encode_response(&out))?;
        w.flush()?;
        served += 1;
    }
    Ok(served)
}

/// Loopback server returning each payload unchanged.
pub fn serve_echo<R: Read, W: Write>(reader: R, writer: W) -> Result<u64> {
    serve(reader, writer, |req| req.payload.clone())
}

/// Where a bridge process lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BridgeEndpoint {
    /// Child process speaking the protocol on stdin/stdout.
    Command { program: String, args: Vec<String> },
    Tcp { addr: String },
}

/// Client side of one bridge connection.
pub struct BridgeHandle {
    writer: Box<dyn Write + Send>,
    responses: Receiver<Result<Vec<f32>>>,
    timeout: Duration,
    stale: usize,
    broken: Option<String>,
    child: Option<Child>,
    socket: Option<TcpStream>,
}

impl std::fmt::Debug for BridgeHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeHandle")
            .field("timeout", &self.timeout)
            .field("stale", &self.stale)
            .field("broken", &self.broken)
            .finish()
    }
}

impl BridgeHandle {
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(reader);
            loop {
                let frame = read_response(&mut r);
                let failed = frame.is_err();
                if tx.send(frame).is_err() || failed {
                    break;
                }
            }
        });
        BridgeHandle {
            writer: Box::new(BufWriter::new(writer)),
            responses: rx,
            timeout,
            stale: 0,
            broken: None,
            child: None,
            socket: None,
        }
    }

    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Bridge(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut h = Self::from_streams(stdout, stdin, timeout);
        h.child = Some(child);
        Ok(h)
    }

    pub fn connect_tcp<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Bridge(format!("connect: {e}")))?;
        let read_half = stream
            .try_clone()
            .map_err(|e| Error::Bridge(format!("socket clone: {e}")))?;
        let control = stream
            .try_clone()
            .map_err(|e| Error::Bridge(format!("socket clone: {e}")))?;
        let mut h = Self::from_streams(read_half, stream, timeout);
        h.socket = Some(control);
        Ok(h)
    }

    pub fn open(endpoint: &BridgeEndpoint, timeout: Duration) -> Result<Self> {
        match endpoint {
            BridgeEndpoint::Command { program, args } => Self::spawn(program, args, timeout),
            BridgeEndpoint::Tcp { addr } => Self::connect_tcp(addr.as_str(), timeout),
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    /// One round trip. Responses to requests that previously timed out are
    /// discarded when they eventually arrive.
    pub fn denoise(&mut self, s_in: &[f64], t_star: f64, v: f64) -> Result<Vec<f64>> {
        if let Some(why) = &self.broken {
            return Err(Error::Bridge(format!("connection unusable: {why}")));
        }
        let frame = encode_request(t_star, v, s_in);
        if let Err(e) = self.writer.write_all(&frame).and_then(|_| self.writer.flush()) {
            self.broken = Some(e.to_string());
            return Err(Error::Bridge(format!("send failed: {e}")));
        }
        loop {
            let got = match self.responses.recv_timeout(self.timeout) {
                Ok(r) => r,
                Err(RecvTimeoutError::Timeout) => {
                    self.stale += 1;
                    return Err(Error::Bridge(format!("timed out after {:?}", self.timeout)));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.broken = Some("peer closed".into());
                    return Err(Error::Bridge("peer closed the connection".into()));
                }
            };
            let payload = match got {
                Ok(p) => p,
                Err(e) => {
                    self.broken = Some(e.to_string());
                    return Err(e);
                }
            };
            if self.stale > 0 {
                self.stale -= 1;
                continue;
            }
            if payload.len() != s_in.len() {
                return Err(Error::Bridge(format!(
                    "response length {} does not match request length {}",
                    payload.len(),
                    s_in.len()
                )));
            }
            return Ok(payload.into_iter().map(f64::from).collect());
        }
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        if let Some(sock) = self.socket.take() {
            let _ = sock.shutdown(std::net::Shutdown::Both);
        }
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn request_round_trip() {
        let frame = encode_request(0.25, 2.0, &[1.0, -0.5]);
        let req = read_request(&mut Cursor::new(frame)).unwrap().unwrap();
        assert_eq!(req.payload, vec![1.0f32, -0.5]);
        assert_eq!((req.t_star, req.v), (0.25, 2.0));
        assert!(read_request(&mut Cursor::new(Vec::new())).unwrap().is_none());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut frame = encode_response(&[1.0, 2.0]);
        frame[7] = b'X';
        assert!(read_response(&mut Cursor::new(frame)).is_err());
        let mut frame = encode_response(&[1.0, 2.0]);
        frame.truncate(frame.len() - 1);
        assert!(read_response(&mut Cursor::new(frame)).is_err());
    }

    #[test]
    fn echo_over_in_memory_streams() {
        let (cr, sw) = io::pipe().unwrap();
        let (sr, cw) = io::pipe().unwrap();
        let server = thread::spawn(move || serve_echo(sr, sw).unwrap());
        let mut h = BridgeHandle::from_streams(cr, cw, Duration::from_secs(5));
        let x = [0.5, -0.25, 3.0];
        assert_eq!(h.denoise(&x, 0.5, 0.1).unwrap(), x.to_vec());
        drop(h);
        assert_eq!(server.join().unwrap(), 1);
    }
}

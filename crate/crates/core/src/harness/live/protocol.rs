//! Wire format of the live session: every message is a 4-byte big-endian
//! length followed by that many bytes of UTF-8 JSON. The JSON object carries
//! its kind in a `"type"` field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::control::{AssemblyState, Queues, RobotMode};

pub const PROTOCOL_VERSION: u32 = 1;

/// Frames longer than this are rejected before any allocation.
pub const MAX_FRAME_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMsg {
    Hello {
        schema_version: u32,
    },
    /// Cursor sample; `t` is the client clock in seconds and must not
    /// decrease.
    Obs {
        t: f64,
        x: f64,
        y: f64,
        pressed: bool,
    },
    Cmd(Command),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Reset,
    Pause { paused: bool },
    /// `name` is a dotted path into the scenario config, e.g.
    /// `tracker.low.alpha`.
    SetParam { name: String, value: serde_json::Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Hello {
        schema_version: u32,
        config: serde_json::Value,
    },
    State(StateFrame),
    Event {
        tag: String,
        t: f64,
    },
    Error {
        message: String,
        /// The server closes the session after a fatal error.
        fatal: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub mode: RobotMode,
    /// Task-level posterior [P1, P2, P3, P4, FR]; null until the first
    /// tracker step.
    pub post1: Option<Vec<f64>>,
    /// Interactive-level posterior [CE, CO].
    pub post2: Option<Vec<f64>>,
    pub ee: [f64; 2],
    pub wrist: [f64; 2],
    pub contact: bool,
    pub queues: Queues,
    pub assemblies: [AssemblyState; 4],
}

pub fn encode<T: Serialize>(msg: &T) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(msg)?;
    if body.len() > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> Result<()> {
    w.write_all(&encode(msg)?)?;
    Ok(())
}

/// Blocking read of one frame. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = check_len(len)?;
    let mut body = vec![0u8; n];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

fn check_len(len: [u8; 4]) -> Result<usize> {
    let n = u32::from_be_bytes(len) as usize;
    if n > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame length {n} exceeds limit")));
    }
    Ok(n)
}

pub fn decode_client(body: &[u8]) -> Result<ClientMsg> {
    let msg: ClientMsg =
        serde_json::from_slice(body).map_err(|e| Error::Protocol(format!("malformed message: {e}")))?;
    if let ClientMsg::Obs { t, x, y, .. } = msg {
        if !(t.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(Error::Protocol("non-finite obs field".into()));
        }
    }
    Ok(msg)
}

pub fn decode_server(body: &[u8]) -> Result<ServerMsg> {
    serde_json::from_slice(body).map_err(|e| Error::Protocol(format!("malformed message: {e}")))
}

/// Incremental frame splitter for reads that may stop mid-frame, e.g. on a
/// socket read timeout.
#[derive(Debug, Default)]
pub struct FrameBuffer {
    buf: Vec<u8>,
}

impl FrameBuffer {
    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame body, if one is buffered.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let n = check_len([self.buf[0], self.buf[1], self.buf[2], self.buf[3]])?;
        if self.buf.len() < 4 + n {
            return Ok(None);
        }
        let body = self.buf[4..4 + n].to_vec();
        self.buf.drain(..4 + n);
        Ok(Some(body))
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obs_wire_bytes() {
        let msg = ClientMsg::Obs {
            t: 0.5,
            x: 0.1,
            y: -0.25,
            pressed: true,
        };
        let bytes = encode(&msg).unwrap();
        let body = br#"{"type":"obs","t":0.5,"x":0.1,"y":-0.25,"pressed":true}"#;
        assert_eq!(&bytes[..4], &(body.len() as u32).to_be_bytes());
        assert_eq!(&bytes[4..], body);
        assert_eq!(decode_client(&bytes[4..]).unwrap(), msg);
    }

    #[test]
    fn command_shapes() {
        let parse = |s: &str| decode_client(s.as_bytes()).unwrap();
        assert_eq!(parse(r#"{"type":"cmd","cmd":"reset"}"#), ClientMsg::Cmd(Command::Reset));
        assert_eq!(
            parse(r#"{"type":"cmd","cmd":"pause","paused":true}"#),
            ClientMsg::Cmd(Command::Pause { paused: true })
        );
        assert_eq!(
            parse(r#"{"type":"cmd","cmd":"set_param","name":"tracker.low.alpha","value":0.9}"#),
            ClientMsg::Cmd(Command::SetParam {
                name: "tracker.low.alpha".into(),
                value: serde_json::json!(0.9)
            })
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "",
            "{",
            r#"{"type":"obs","t":0.0,"x":0.0}"#,
            r#"{"type":"teleport"}"#,
            r#"{"type":"obs","t":0.0,"x":0.0,"y":0.0,"pressed":false,"z":1}"#,
            r#"{"type":"cmd","cmd":"explode"}"#,
        ] {
            assert!(decode_client(s.as_bytes()).is_err(), "{s}");
        }
    }

    #[test]
    fn frame_buffer_splits_partial_reads() {
        let a = encode(&ClientMsg::Hello { schema_version: 1 }).unwrap();
        let b = encode(&ClientMsg::Cmd(Command::Reset)).unwrap();
        let all: Vec<u8> = a.iter().chain(b.iter()).copied().collect();
        let mut fb = FrameBuffer::default();
        let mut got = Vec::new();
        for chunk in all.chunks(3) {
            fb.extend(chunk);
            while let Some(f) = fb.next_frame().unwrap() {
                got.push(decode_client(&f).unwrap());
            }
        }
        assert_eq!(got.len(), 2);
        assert!(fb.is_empty());
    }

    #[test]
    fn oversized_length_is_rejected() {
        let mut fb = FrameBuffer::default();
        fb.extend(&u32::MAX.to_be_bytes());
        assert!(fb.next_frame().is_err());
        let mut r: &[u8] = &[0xff, 0xff, 0xff, 0xff];
        assert!(read_frame(&mut r).is_err());
    }
}

//! Length-prefixed binary frames.
//!
//! `u32 BE payload length | u8 type | body`. Integers in bodies are big-endian,
//! floats little-endian.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_FRAME: usize = 64 * 1024 * 1024;

const T_ERROR: u8 = 0x00;
const T_HELLO: u8 = 0x01;
const T_CONFIG: u8 = 0x02;
const T_PARAMS: u8 = 0x03;
const T_UPDATE: u8 = 0x04;
const T_DONE: u8 = 0x05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Logistic = 0,
    Svm = 1,
}

impl TryFrom<u8> for Algo {
    type Error = Error;

    fn try_from(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Algo::Logistic),
            1 => Ok(Algo::Svm),
            _ => Err(Error::Protocol(format!("unknown algorithm code {b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        worker_id: u32,
        num_rows: u64,
        num_features: u32,
    },
    Config {
        algo: Algo,
        rounds: u32,
        seed: u64,
        lambda: f64,
        learning_rate: f64,
    },
    Params {
        round: u32,
        values: Vec<f64>,
    },
    Update {
        round: u32,
        sample_count: u64,
        values: Vec<f64>,
    },
    Done,
    Error(String),
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Error(_) => T_ERROR,
            Message::Hello { .. } => T_HELLO,
            Message::Config { .. } => T_CONFIG,
            Message::Params { .. } => T_PARAMS,
            Message::Update { .. } => T_UPDATE,
            Message::Done => T_DONE,
        }
    }
}

/// Bytes on the wire for `msg`, prefix included.
pub fn encoded_len(msg: &Message) -> usize {
    let body = match msg {
        Message::Hello { .. } => 4 + 8 + 4,
        Message::Config { .. } => 1 + 4 + 8 + 8 + 8,
        Message::Params { values, .. } => 4 + 4 + 8 * values.len(),
        Message::Update { values, .. } => 4 + 8 + 4 + 8 * values.len(),
        Message::Done => 0,
        Message::Error(text) => text.len(),
    };
    4 + 1 + body
}

fn put_floats(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u32).to_be_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>> {
    let len = encoded_len(msg);
    if len - 4 > MAX_FRAME {
        return Err(Error::Protocol(format!("frame of {} bytes exceeds limit", len - 4)));
    }
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&((len - 4) as u32).to_be_bytes());
    out.push(msg.type_byte());
    match msg {
        Message::Hello {
            worker_id,
            num_rows,
            num_features,
        } => {
            out.extend_from_slice(&worker_id.to_be_bytes());
            out.extend_from_slice(&num_rows.to_be_bytes());
            out.extend_from_slice(&num_features.to_be_bytes());
        }
        Message::Config {
            algo,
            rounds,
            seed,
            lambda,
            learning_rate,
        } => {
            out.push(*algo as u8);
            out.extend_from_slice(&rounds.to_be_bytes());
            out.extend_from_slice(&seed.to_be_bytes());
            out.extend_from_slice(&lambda.to_le_bytes());
            out.extend_from_slice(&learning_rate.to_le_bytes());
        }
        Message::Params { round, values } => {
            out.extend_from_slice(&round.to_be_bytes());
            put_floats(&mut out, values);
        }
        Message::Update {
            round,
            sample_count,
            values,
        } => {
            out.extend_from_slice(&round.to_be_bytes());
            out.extend_from_slice(&sample_count.to_be_bytes());
            put_floats(&mut out, values);
        }
        Message::Done => {}
        Message::Error(text) => out.extend_from_slice(text.as_bytes()),
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Protocol(format!(
                "body truncated: need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            ))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Protocol("float count overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<()> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            extra => Err(Error::Protocol(format!("{extra} trailing bytes in frame"))),
        }
    }
}

/// Decodes one payload (type byte + body, no length prefix).
pub fn decode_payload(payload: &[u8]) -> Result<Message> {
    let (&kind, body) = payload
        .split_first()
        .ok_or_else(|| Error::Protocol("empty frame".into()))?;
    let mut c = Cursor { buf: body, pos: 0 };
    let msg = match kind {
        T_HELLO => Message::Hello {
            worker_id: c.u32()?,
            num_rows: c.u64()?,
            num_features: c.u32()?,
        },
        T_CONFIG => Message::Config {
            algo: Algo::try_from(c.u8()?)?,
            rounds: c.u32()?,
            seed: c.u64()?,
            lambda: c.f64()?,
            learning_rate: c.f64()?,
        },
        T_PARAMS => Message::Params {
            round: c.u32()?,
            values: c.floats()?,
        },
        T_UPDATE => Message::Update {
            round: c.u32()?,
            sample_count: c.u64()?,
            values: c.floats()?,
        },
        T_DONE => Message::Done,
        T_ERROR => {
            let text = std::str::from_utf8(body).map_err(|e| Error::Protocol(format!("error text not UTF-8: {e}")))?;
            c.pos = body.len();
            Message::Error(text.to_owned())
        }
        other => return Err(Error::Protocol(format!("unknown frame type 0x{other:02x}"))),
    };
    c.finish()?;
    Ok(msg)
}

/// Hex dump of the first bytes of a frame, for logs.
pub fn frame_dump(bytes: &[u8]) -> String {
    let shown: Vec<String> = bytes.iter().take(32).map(|b| format!("{b:02x}")).collect();
    let more = if bytes.len() > 32 { format!(" … ({} bytes)", bytes.len()) } else { String::new() };
    format!("{}{more}", shown.join(" "))
}

/// Writes one frame and returns the bytes written.
pub fn write_message<W: Write>(out: &mut W, msg: &Message) -> Result<usize> {
    let bytes = encode(msg)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(bytes.len())
}

/// Reads one frame; returns the message and the bytes consumed.
///
/// A clean EOF before the length prefix is reported as `Ok(None)`.
pub fn read_message<R: Read>(input: &mut R) -> Result<Option<(Message, usize)>> {
    let mut len_buf = [0u8; 4];
    match input.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len_buf) as usize;
    if len == 0 {
        return Err(Error::Protocol("zero-length frame".into()));
    }
    if len > MAX_FRAME {
        return Err(Error::Protocol(format!("frame length {len} exceeds limit {MAX_FRAME}")));
    }
    let mut payload = vec![0u8; len];
    input.read_exact(&mut payload).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Protocol(format!("connection closed inside a {len}-byte frame")),
        _ => e.into(),
    })?;
    let msg = decode_payload(&payload).inspect_err(|e| {
        log::warn!("bad frame ({e}): {}", frame_dump(&payload));
    })?;
    Ok(Some((msg, len + 4)))
}

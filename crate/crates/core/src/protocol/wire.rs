//! Length-prefixed frames: `[u32 LE length][u8 type][payload]`, where the
//! length counts the type byte and the payload.

use std::fmt;
use std::io::{self, Read, Write};

use crate::{Error, Result};

pub const DEFAULT_MAX_FRAME: usize = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Enroll = 0x01,
    EnrollAck = 0x02,
    AuthRequest = 0x03,
    ScoreResponse = 0x04,
    Error = 0x05,
}

impl MessageType {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Self::Enroll,
            0x02 => Self::EnrollAck,
            0x03 => Self::AuthRequest,
            0x04 => Self::ScoreResponse,
            0x05 => Self::Error,
            _ => return None,
        })
    }
}

/// Codes carried by ERROR frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    Malformed,
    Params,
    Duplicate,
    UnknownIdentity,
    NoSwitchKey,
    OutOfOrder,
    /// A secret key or plaintext was offered to the server.
    Forbidden,
    FrameTooLarge,
    Storage,
    Internal,
    Other(u16),
}

impl ErrorCode {
    pub fn to_u16(self) -> u16 {
        match self {
            Self::Malformed => 1,
            Self::Params => 2,
            Self::Duplicate => 3,
            Self::UnknownIdentity => 4,
            Self::NoSwitchKey => 5,
            Self::OutOfOrder => 6,
            Self::Forbidden => 7,
            Self::FrameTooLarge => 8,
            Self::Storage => 9,
            Self::Internal => 10,
            Self::Other(c) => c,
        }
    }

    pub fn from_u16(c: u16) -> Self {
        match c {
            1 => Self::Malformed,
            2 => Self::Params,
            3 => Self::Duplicate,
            4 => Self::UnknownIdentity,
            5 => Self::NoSwitchKey,
            6 => Self::OutOfOrder,
            7 => Self::Forbidden,
            8 => Self::FrameTooLarge,
            9 => Self::Storage,
            10 => Self::Internal,
            c => Self::Other(c),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Malformed => "malformed",
            Self::Params => "params",
            Self::Duplicate => "duplicate",
            Self::UnknownIdentity => "unknown_identity",
            Self::NoSwitchKey => "no_switch_key",
            Self::OutOfOrder => "out_of_order",
            Self::Forbidden => "forbidden",
            Self::FrameTooLarge => "frame_too_large",
            Self::Storage => "storage",
            Self::Internal => "internal",
            Self::Other(_) => "other",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: MessageType, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }

    pub fn error(code: ErrorCode, message: &str) -> Self {
        let mut payload = code.to_u16().to_le_bytes().to_vec();
        payload.extend_from_slice(message.as_bytes());
        Self::new(MessageType::Error, payload)
    }

    pub fn encode(&self) -> Vec<u8> {
        let len = (self.payload.len() + 1) as u32;
        let mut out = Vec::with_capacity(self.payload.len() + 5);
        out.extend_from_slice(&len.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, frame: &Frame) -> Result<()> {
    w.write_all(&frame.encode())?;
    w.flush()?;
    Ok(())
}

/// Errors while reading a frame.
#[derive(Debug)]
pub enum FrameError {
    /// The stream ended cleanly before a new frame started.
    Closed,
    Io(io::Error),
    Malformed(String),
    TooLarge(usize),
}

impl From<FrameError> for Error {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Closed => Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "connection closed",
            )),
            FrameError::Io(e) => Error::Io(e),
            FrameError::Malformed(m) => Error::Protocol {
                code: ErrorCode::Malformed,
                message: m,
            },
            FrameError::TooLarge(n) => Error::Protocol {
                code: ErrorCode::FrameTooLarge,
                message: format!("frame of {n} bytes"),
            },
        }
    }
}

pub fn read_frame<R: Read + ?Sized>(r: &mut R, max_len: usize) -> Result<Frame, FrameError> {
    let mut len_buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut len_buf[filled..]) {
            Ok(0) if filled == 0 => return Err(FrameError::Closed),
            Ok(0) => return Err(FrameError::Malformed("truncated length prefix".into())),
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(FrameError::Io(e)),
        }
    }
    let len = u32::from_le_bytes(len_buf) as usize;
    if len == 0 {
        return Err(FrameError::Malformed("empty frame".into()));
    }
    if len > max_len {
        return Err(FrameError::TooLarge(len));
    }
    let mut body = Vec::new();
    r.take(len as u64)
        .read_to_end(&mut body)
        .map_err(FrameError::Io)?;
    if body.len() != len {
        return Err(FrameError::Malformed(format!(
            "frame truncated at {} of {len} bytes",
            body.len()
        )));
    }
    let kind = MessageType::from_u8(body[0])
        .ok_or_else(|| FrameError::Malformed(format!("unknown message type {:#04x}", body[0])))?;
    body.remove(0);
    Ok(Frame {
        kind,
        payload: body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let f = Frame::new(MessageType::AuthRequest, vec![1, 2, 3]);
        let bytes = f.encode();
        assert_eq!(&bytes[..5], &[4, 0, 0, 0, 3]);
        assert_eq!(read_frame(&mut &bytes[..], DEFAULT_MAX_FRAME).unwrap(), f);
    }

    #[test]
    fn rejects_bad_frames() {
        let cases: [&[u8]; 5] = [
            &[0, 0, 0, 0],
            &[1, 0, 0, 0, 9],
            &[5, 0, 0, 0, 1, 2],
            &[1, 0],
            &[0xff, 0xff, 0xff, 0xff, 1],
        ];
        for c in cases {
            assert!(!matches!(
                read_frame(&mut &c[..], DEFAULT_MAX_FRAME),
                Ok(_) | Err(FrameError::Closed)
            ));
        }
        assert!(matches!(
            read_frame(&mut &b""[..], 16),
            Err(FrameError::Closed)
        ));
        assert!(matches!(
            read_frame(&mut &[17u8, 0, 0, 0][..], 16),
            Err(FrameError::TooLarge(17))
        ));
    }

    #[test]
    fn error_codes_round_trip() {
        for c in 1..=12u16 {
            assert_eq!(ErrorCode::from_u16(c).to_u16(), c);
        }
        let f = Frame::error(ErrorCode::UnknownIdentity, "nobody");
        assert_eq!(&f.payload[..2], &[4, 0]);
    }
}

//! Typed protocol payloads. Cryptographic objects travel as opaque blobs and
//! are decoded by the receiving side against the negotiated parameters.

use super::wire::{ErrorCode, Frame, MessageType};
use crate::fv::{Reader, Writer};
use crate::{Error, Result};

pub const MAX_IDENTITY_LEN: usize = 256;

fn put_identity(w: &mut Writer, identity: &str) {
    w.u16(identity.len() as u16);
    w.bytes(identity.as_bytes());
}

fn get_identity(r: &mut Reader<'_>) -> Result<String> {
    let len = r.u16()? as usize;
    let raw = r.take(len)?;
    let s = std::str::from_utf8(raw).map_err(|_| Error::Decode("identity is not UTF-8".into()))?;
    check_identity(s)?;
    Ok(s.to_string())
}

pub fn check_identity(identity: &str) -> Result<()> {
    if identity.is_empty() || identity.len() > MAX_IDENTITY_LEN {
        return Err(Error::InvalidParameter(format!(
            "identity must be 1..={MAX_IDENTITY_LEN} bytes"
        )));
    }
    Ok(())
}

fn put_blob(w: &mut Writer, b: &[u8]) {
    w.u32(b.len() as u32);
    w.bytes(b);
}

fn get_blob(r: &mut Reader<'_>) -> Result<Vec<u8>> {
    let len = r.u32()? as usize;
    Ok(r.take(len)?.to_vec())
}

fn put_blobs(w: &mut Writer, blobs: &[Vec<u8>]) {
    w.u16(blobs.len() as u16);
    for b in blobs {
        put_blob(w, b);
    }
}

fn get_blobs(r: &mut Reader<'_>) -> Result<Vec<Vec<u8>>> {
    let count = r.u16()? as usize;
    (0..count).map(|_| get_blob(r)).collect()
}

/// Everything the server keeps for one identity; also the ENROLL body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollmentRecord {
    pub identity: String,
    pub params: Vec<u8>,
    pub public_bundle: Vec<u8>,
    pub templates: Vec<Vec<u8>>,
    pub switch_keys: Vec<Vec<u8>>,
}

impl EnrollmentRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        put_identity(&mut w, &self.identity);
        put_blob(&mut w, &self.params);
        put_blob(&mut w, &self.public_bundle);
        put_blobs(&mut w, &self.templates);
        if !self.switch_keys.is_empty() {
            put_blobs(&mut w, &self.switch_keys);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let identity = get_identity(&mut r)?;
        let params = get_blob(&mut r)?;
        let public_bundle = get_blob(&mut r)?;
        let templates = get_blobs(&mut r)?;
        let switch_keys = if r.remaining() > 0 {
            get_blobs(&mut r)?
        } else {
            Vec::new()
        };
        r.finish()?;
        Ok(Self {
            identity,
            params,
            public_bundle,
            templates,
            switch_keys,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollAck {
    pub identity: String,
    pub stored: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthRequest {
    pub identity: String,
    pub probe: Vec<u8>,
    /// Public bundle of the probe's key when it differs from the enrolled one.
    pub probe_key: Option<Vec<u8>>,
    pub switch_keys: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreResponse {
    pub scores: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Enroll(EnrollmentRecord),
    EnrollAck(EnrollAck),
    AuthRequest(AuthRequest),
    ScoreResponse(ScoreResponse),
    Error { code: ErrorCode, message: String },
}

impl Message {
    pub fn kind(&self) -> MessageType {
        match self {
            Self::Enroll(_) => MessageType::Enroll,
            Self::EnrollAck(_) => MessageType::EnrollAck,
            Self::AuthRequest(_) => MessageType::AuthRequest,
            Self::ScoreResponse(_) => MessageType::ScoreResponse,
            Self::Error { .. } => MessageType::Error,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let payload = match self {
            Self::Enroll(rec) => rec.to_bytes(),
            Self::EnrollAck(ack) => {
                let mut w = Writer::new();
                put_identity(&mut w, &ack.identity);
                w.u16(ack.stored);
                w.finish()
            }
            Self::AuthRequest(req) => {
                let mut w = Writer::new();
                put_identity(&mut w, &req.identity);
                put_blob(&mut w, &req.probe);
                match &req.probe_key {
                    Some(k) => {
                        w.u8(1);
                        put_blob(&mut w, k);
                    }
                    None => w.u8(0),
                }
                put_blobs(&mut w, &req.switch_keys);
                w.finish()
            }
            Self::ScoreResponse(resp) => {
                let mut w = Writer::new();
                put_blobs(&mut w, &resp.scores);
                w.finish()
            }
            Self::Error { code, message } => return Frame::error(*code, message),
        };
        Frame::new(self.kind(), payload)
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let mut r = Reader::new(&frame.payload);
        let msg = match frame.kind {
            MessageType::Enroll => {
                return Ok(Self::Enroll(EnrollmentRecord::from_bytes(&frame.payload)?))
            }
            MessageType::EnrollAck => Self::EnrollAck(EnrollAck {
                identity: get_identity(&mut r)?,
                stored: r.u16()?,
            }),
            MessageType::AuthRequest => {
                let identity = get_identity(&mut r)?;
                let probe = get_blob(&mut r)?;
                let probe_key = match r.u8()? {
                    0 => None,
                    1 => Some(get_blob(&mut r)?),
                    f => return Err(Error::Decode(format!("probe key flag {f}"))),
                };
                let switch_keys = get_blobs(&mut r)?;
                Self::AuthRequest(AuthRequest {
                    identity,
                    probe,
                    probe_key,
                    switch_keys,
                })
            }
            MessageType::ScoreResponse => Self::ScoreResponse(ScoreResponse {
                scores: get_blobs(&mut r)?,
            }),
            MessageType::Error => {
                let code = ErrorCode::from_u16(r.u16()?);
                let rest = r.take(r.remaining())?;
                Self::Error {
                    code,
                    message: String::from_utf8_lossy(rest).into_owned(),
                }
            }
        };
        r.finish()?;
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::wire::read_frame;

    fn round_trip(m: Message) {
        let bytes = m.to_frame().encode();
        let frame = read_frame(&mut &bytes[..], 1 << 20).unwrap();
        assert_eq!(Message::from_frame(&frame).unwrap(), m);
    }

    #[test]
    fn all_messages_round_trip() {
        let rec = EnrollmentRecord {
            identity: "alice".into(),
            params: vec![1, 2],
            public_bundle: vec![3; 10],
            templates: vec![vec![4; 5], vec![5; 6]],
            switch_keys: vec![],
        };
        round_trip(Message::Enroll(rec.clone()));
        round_trip(Message::Enroll(EnrollmentRecord {
            switch_keys: vec![vec![9; 3]],
            ..rec
        }));
        round_trip(Message::EnrollAck(EnrollAck {
            identity: "alice".into(),
            stored: 2,
        }));
        round_trip(Message::AuthRequest(AuthRequest {
            identity: "bob".into(),
            probe: vec![7; 9],
            probe_key: Some(vec![8; 4]),
            switch_keys: vec![vec![1], vec![2]],
        }));
        round_trip(Message::ScoreResponse(ScoreResponse {
            scores: vec![vec![0; 3]],
        }));
        round_trip(Message::Error {
            code: ErrorCode::Duplicate,
            message: "already enrolled".into(),
        });
    }

    #[test]
    fn malformed_payloads() {
        let bad = [
            Frame::new(MessageType::EnrollAck, vec![0, 0, 1, 0]),
            Frame::new(MessageType::AuthRequest, vec![1, 0, b'a', 0, 0, 0, 0, 7]),
            Frame::new(MessageType::ScoreResponse, vec![1, 0]),
            Frame::new(MessageType::Enroll, vec![2, 0, 0xff, 0xfe]),
        ];
        for f in bad {
            assert!(Message::from_frame(&f).is_err(), "{f:?}");
        }
    }
}

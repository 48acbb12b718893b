//! Client side: local key ownership, template encryption, and decryption and
//! aggregation of returned scores.

use std::io::{Read, Write};

use rand::CryptoRng;

use super::keys::ClientKeys;
use super::message::{AuthRequest, EnrollAck, EnrollmentRecord, Message, ScoreResponse};
use super::wire::{read_frame, write_frame, ErrorCode, MessageType, DEFAULT_MAX_FRAME};
use crate::codec::quantize;
use crate::fv::{Ciphertext, KeySwitchKey};
use crate::matcher::{decrypt_score, encrypt_template, normalize, MatchPath, MatchScore};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClientState {
    Ready,
    AwaitingAck,
    AwaitingScores,
    Closed,
}

/// One client connection. Requests are strictly sequential.
#[derive(Debug)]
pub struct ClientSession<S> {
    stream: S,
    state: ClientState,
    max_frame: usize,
}

impl<S: Read + Write> ClientSession<S> {
    pub fn new(stream: S) -> Self {
        Self {
            stream,
            state: ClientState::Ready,
            max_frame: DEFAULT_MAX_FRAME,
        }
    }

    pub fn with_max_frame(mut self, max_frame: usize) -> Self {
        self.max_frame = max_frame;
        self
    }

    pub fn state(&self) -> ClientState {
        self.state
    }

    pub fn into_inner(self) -> S {
        self.stream
    }

    fn exchange(&mut self, request: Message, awaiting: ClientState) -> Result<Message> {
        if self.state != ClientState::Ready {
            return Err(Error::Protocol {
                code: ErrorCode::OutOfOrder,
                message: format!("client session is {:?}", self.state),
            });
        }
        write_frame(&mut self.stream, &request.to_frame())
            .inspect_err(|_| self.state = ClientState::Closed)?;
        self.state = awaiting;
        let frame = read_frame(&mut self.stream, self.max_frame).map_err(|e| {
            self.state = ClientState::Closed;
            Error::from(e)
        })?;
        let expected = match awaiting {
            ClientState::AwaitingAck => MessageType::EnrollAck,
            _ => MessageType::ScoreResponse,
        };
        if frame.kind == MessageType::Error {
            self.state = ClientState::Ready;
            return match Message::from_frame(&frame)? {
                Message::Error { code, message } => Err(Error::Protocol { code, message }),
                _ => unreachable!("error frames decode to errors"),
            };
        }
        if frame.kind != expected {
            self.state = ClientState::Closed;
            let message = format!("expected {expected:?}, received {:?}", frame.kind);
            let _ = write_frame(
                &mut self.stream,
                &Message::Error {
                    code: ErrorCode::OutOfOrder,
                    message: message.clone(),
                }
                .to_frame(),
            );
            return Err(Error::Protocol {
                code: ErrorCode::OutOfOrder,
                message,
            });
        }
        let reply =
            Message::from_frame(&frame).inspect_err(|_| self.state = ClientState::Closed)?;
        self.state = ClientState::Ready;
        Ok(reply)
    }

    pub fn enroll(&mut self, record: &EnrollmentRecord) -> Result<EnrollAck> {
        match self.exchange(Message::Enroll(record.clone()), ClientState::AwaitingAck)? {
            Message::EnrollAck(ack) => Ok(ack),
            _ => unreachable!("kind checked in exchange"),
        }
    }

    pub fn authenticate(&mut self, request: &AuthRequest) -> Result<ScoreResponse> {
        match self.exchange(
            Message::AuthRequest(request.clone()),
            ClientState::AwaitingScores,
        )? {
            Message::ScoreResponse(resp) => Ok(resp),
            _ => unreachable!("kind checked in exchange"),
        }
    }
}

/// How per-template dissimilarities are combined into one decision value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    #[default]
    Minimum,
    Mean,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Self::Minimum => values.iter().copied().fold(f64::INFINITY, f64::min),
            Self::Mean => values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub accepted: bool,
    pub aggregate: f64,
    pub scores: Vec<MatchScore>,
}

/// Client key material plus template settings.
#[derive(Clone, Debug)]
pub struct Client {
    keys: ClientKeys,
    delta: f64,
    path: MatchPath,
    aggregation: Aggregation,
    switch_keys: Vec<KeySwitchKey>,
    send_probe_key: bool,
}

impl Client {
    /// Batched templates when the parameters allow it, element-wise otherwise.
    pub fn new(keys: ClientKeys, delta: f64) -> Self {
        let path = if keys.context().supports_batching() {
            MatchPath::Batched
        } else {
            MatchPath::Elementwise
        };
        Self {
            keys,
            delta,
            path,
            aggregation: Aggregation::Minimum,
            switch_keys: Vec::new(),
            send_probe_key: false,
        }
    }

    pub fn with_path(mut self, path: MatchPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    /// Switch keys to upload with every request, and send the probe's public
    /// key alongside it.
    pub fn with_switch_keys(mut self, keys: Vec<KeySwitchKey>) -> Self {
        self.send_probe_key = !keys.is_empty();
        self.switch_keys = keys;
        self
    }

    pub fn keys(&self) -> &ClientKeys {
        &self.keys
    }

    pub fn path(&self) -> MatchPath {
        self.path
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn encrypt_features<R: CryptoRng + ?Sized>(
        &self,
        features: &[f64],
        rng: &mut R,
    ) -> Result<Vec<u8>> {
        let q = quantize(&normalize(features)?, self.delta)?;
        Ok(encrypt_template(&q, self.keys.public_key(), self.path, rng)?.to_bytes())
    }

    fn switch_blobs(&self) -> Vec<Vec<u8>> {
        self.switch_keys
            .iter()
            .map(KeySwitchKey::to_bytes)
            .collect()
    }

    /// Encrypt and package enrollment samples. Features are normalized first.
    pub fn enrollment_record<R: CryptoRng + ?Sized>(
        &self,
        identity: &str,
        samples: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<EnrollmentRecord> {
        let templates = samples
            .iter()
            .map(|f| self.encrypt_features(f, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnrollmentRecord {
            identity: identity.to_string(),
            params: self.keys.context().params().to_bytes(),
            public_bundle: self.keys.bundle().to_bytes(),
            templates,
            switch_keys: self.switch_blobs(),
        })
    }

    pub fn auth_request<R: CryptoRng + ?Sized>(
        &self,
        identity: &str,
        probe: &[f64],
        rng: &mut R,
    ) -> Result<AuthRequest> {
        Ok(AuthRequest {
            identity: identity.to_string(),
            probe: self.encrypt_features(probe, rng)?,
            probe_key: self
                .send_probe_key
                .then(|| self.keys.public_key().to_bytes()),
            switch_keys: self.switch_blobs(),
        })
    }

    pub fn decrypt_scores(&self, response: &ScoreResponse) -> Result<Vec<MatchScore>> {
        let ctx = self.keys.context();
        response
            .scores
            .iter()
            .map(|b| {
                let ct = Ciphertext::from_bytes(ctx, b)?;
                decrypt_score(&ct, self.keys.secret_key(), self.path, self.delta)
            })
            .collect()
    }

    pub fn enroll<S: Read + Write, R: CryptoRng + ?Sized>(
        &self,
        session: &mut ClientSession<S>,
        identity: &str,
        samples: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<EnrollAck> {
        session.enroll(&self.enrollment_record(identity, samples, rng)?)
    }

    /// Score `probe` against `identity` and accept when the aggregated
    /// dissimilarity is at most `threshold`.
    pub fn verify<S: Read + Write, R: CryptoRng + ?Sized>(
        &self,
        session: &mut ClientSession<S>,
        identity: &str,
        probe: &[f64],
        threshold: f64,
        rng: &mut R,
    ) -> Result<Verification> {
        let response = session.authenticate(&self.auth_request(identity, probe, rng)?)?;
        let scores = self.decrypt_scores(&response)?;
        let values: Vec<f64> = scores.iter().map(|s| s.dissimilarity).collect();
        let aggregate = self
            .aggregation
            .apply(&values)
            .ok_or_else(|| Error::Decode("server returned no scores".into()))?;
        Ok(Verification {
            accepted: aggregate <= threshold,
            aggregate,
            scores,
        })
    }
}

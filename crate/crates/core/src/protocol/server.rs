//! Server side: enrollment storage and encrypted scoring. The server only
//! ever decodes public material and ciphertexts; every object header it parses
//! goes through an audit observer, and any request that carries a secret key
//! or plaintext is refused.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::os::unix::net::UnixStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::keys::PublicBundle;
use super::message::{
    check_identity, AuthRequest, EnrollAck, EnrollmentRecord, Message, ScoreResponse,
};
use super::store::TemplateStore;
use super::wire::{read_frame, write_frame, ErrorCode, FrameError, MessageType, DEFAULT_MAX_FRAME};
use crate::fv::{
    key_switch, with_decode_observer, EncryptionParams, FvContext, KeyId, KeySwitchKey, ObjectTag,
    PublicKey,
};
use crate::matcher::{check_template_params, score, EncryptedTemplate};
use crate::{Error, Result};

/// Reply text for `e`; the code travels separately.
fn error_message(e: &Error) -> String {
    match e {
        Error::Protocol { message, .. } => message.clone(),
        other => other.to_string(),
    }
}

fn protocol_error(code: ErrorCode, message: impl Into<String>) -> Error {
    Error::Protocol {
        code,
        message: message.into(),
    }
}

/// The wire code reported for a server-side failure.
pub fn error_code(e: &Error) -> ErrorCode {
    match e {
        Error::Protocol { code, .. } => *code,
        Error::Decode(_) => ErrorCode::Malformed,
        Error::ParameterMismatch(_)
        | Error::InvalidParameter(_)
        | Error::Unsupported(_)
        | Error::Capacity(_)
        | Error::Overflow(_)
        | Error::KeyMismatch(_)
        | Error::Domain(_)
        | Error::RankDeficient { .. } => ErrorCode::Params,
        Error::MissingGaloisKey(_) => ErrorCode::Params,
        Error::NotFound(_) => ErrorCode::UnknownIdentity,
        Error::Integrity(_) | Error::Io(_) => ErrorCode::Storage,
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub max_frame: usize,
    /// Largest ring degree a client may enroll with.
    pub max_ring_degree: usize,
    pub max_templates: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_frame: DEFAULT_MAX_FRAME,
            max_ring_degree: 16384,
            max_templates: 1024,
        }
    }
}

/// Record of every object header the server parsed.
#[derive(Debug, Default)]
pub struct AuditLog {
    decoded: Mutex<Vec<ObjectTag>>,
    refused: Mutex<Vec<ObjectTag>>,
}

impl AuditLog {
    /// Tags of all headers parsed, in order.
    pub fn decoded(&self) -> Vec<ObjectTag> {
        self.decoded.lock().expect("audit poisoned").clone()
    }

    /// Forbidden tags that caused a request to be refused.
    pub fn refused(&self) -> Vec<ObjectTag> {
        self.refused.lock().expect("audit poisoned").clone()
    }

    /// True when no secret key or plaintext header was ever parsed.
    pub fn is_clean(&self) -> bool {
        self.decoded().iter().all(|t| !is_forbidden(*t))
    }
}

fn is_forbidden(tag: ObjectTag) -> bool {
    matches!(tag, ObjectTag::SecretKey | ObjectTag::Plaintext)
}

/// Everything decoded from one stored enrollment.
struct Enrollment {
    ctx: Arc<FvContext>,
    bundle: PublicBundle,
    templates: Vec<EncryptedTemplate>,
    switch_keys: Vec<KeySwitchKey>,
}

pub struct Server {
    store: TemplateStore,
    config: ServerConfig,
    contexts: Mutex<HashMap<[u8; 32], Arc<FvContext>>>,
    audit: AuditLog,
}

impl std::fmt::Debug for Server {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Server")
            .field("store", &self.store)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Server {
    pub fn new(store: TemplateStore, config: ServerConfig) -> Arc<Self> {
        Arc::new(Self {
            store,
            config,
            contexts: Mutex::new(HashMap::new()),
            audit: AuditLog::default(),
        })
    }

    pub fn store(&self) -> &TemplateStore {
        &self.store
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// Answer one request. Never panics on hostile input; failures become
    /// ERROR messages.
    pub fn handle(&self, msg: &Message) -> Message {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let sink = seen.clone();
        let result = with_decode_observer(
            Arc::new(move |tag| sink.lock().expect("audit poisoned").push(tag)),
            || self.dispatch(msg),
        );
        let seen = std::mem::take(&mut *seen.lock().expect("audit poisoned"));
        let forbidden: Vec<ObjectTag> = seen.iter().copied().filter(|t| is_forbidden(*t)).collect();
        self.audit
            .decoded
            .lock()
            .expect("audit poisoned")
            .extend(seen);
        if !forbidden.is_empty() {
            self.audit
                .refused
                .lock()
                .expect("audit poisoned")
                .extend(&forbidden);
            return Message::Error {
                code: ErrorCode::Forbidden,
                message: format!("server refuses {:?} objects", forbidden[0]),
            };
        }
        match result {
            Ok(reply) => reply,
            Err(e) => Message::Error {
                code: error_code(&e),
                message: error_message(&e),
            },
        }
    }

    fn dispatch(&self, msg: &Message) -> Result<Message> {
        match msg {
            Message::Enroll(rec) => self.enroll(rec).map(Message::EnrollAck),
            Message::AuthRequest(req) => self.authenticate(req).map(Message::ScoreResponse),
            other => Err(protocol_error(
                ErrorCode::OutOfOrder,
                format!("unexpected {:?} from client", other.kind()),
            )),
        }
    }

    fn context(&self, params_blob: &[u8]) -> Result<Arc<FvContext>> {
        let params = EncryptionParams::from_bytes(params_blob)?;
        let digest = params.digest();
        if let Some(ctx) = self
            .contexts
            .lock()
            .expect("context cache poisoned")
            .get(&digest)
        {
            return Ok(ctx.clone());
        }
        if params.n() < 16
            || params.n() > self.config.max_ring_degree
            || params.plain_moduli().len() > 4
        {
            return Err(protocol_error(
                ErrorCode::Params,
                format!("parameters outside server policy: {params:?}"),
            ));
        }
        let ctx = FvContext::new(params)?;
        self.contexts
            .lock()
            .expect("context cache poisoned")
            .insert(digest, ctx.clone());
        Ok(ctx)
    }

    fn decode_enrollment(&self, rec: &EnrollmentRecord) -> Result<Enrollment> {
        let ctx = self.context(&rec.params)?;
        let bundle = PublicBundle::from_bytes(&ctx, &rec.public_bundle)?;
        let key = bundle.key_id();
        if rec.templates.is_empty() || rec.templates.len() > self.config.max_templates {
            return Err(protocol_error(
                ErrorCode::Params,
                format!("{} templates per identity", rec.templates.len()),
            ));
        }
        let templates = rec
            .templates
            .iter()
            .map(|b| {
                let t = EncryptedTemplate::from_bytes(&ctx, b)?;
                if t.key_id() != key {
                    return Err(Error::KeyMismatch(
                        "template not encrypted under the enrolled key".into(),
                    ));
                }
                check_template_params(&ctx, t.path(), t.delta(), t.dim())?;
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        let switch_keys = decode_switch_keys(&ctx, &rec.switch_keys)?;
        if switch_keys
            .iter()
            .any(|k| k.source_id() != key && k.target_id() != key)
        {
            return Err(Error::KeyMismatch(
                "switch key does not involve the enrolled key".into(),
            ));
        }
        Ok(Enrollment {
            ctx,
            bundle,
            templates,
            switch_keys,
        })
    }

    fn enroll(&self, rec: &EnrollmentRecord) -> Result<EnrollAck> {
        check_identity(&rec.identity)?;
        if self.store.contains(&rec.identity) {
            return Err(protocol_error(
                ErrorCode::Duplicate,
                format!("identity {:?} already enrolled", rec.identity),
            ));
        }
        let enrollment = self.decode_enrollment(rec)?;
        self.store.put(&rec.identity, &rec.to_bytes())?;
        Ok(EnrollAck {
            identity: rec.identity.clone(),
            stored: enrollment.templates.len() as u16,
        })
    }

    fn authenticate(&self, req: &AuthRequest) -> Result<ScoreResponse> {
        check_identity(&req.identity)?;
        let stored = self.store.get(&req.identity).map_err(|e| match e {
            Error::NotFound(_) => protocol_error(
                ErrorCode::UnknownIdentity,
                format!("identity {:?} is not enrolled", req.identity),
            ),
            e => e,
        })?;
        let rec = EnrollmentRecord::from_bytes(&stored)
            .map_err(|e| Error::Integrity(format!("stored record: {e}")))?;
        let Enrollment {
            ctx,
            bundle,
            templates,
            mut switch_keys,
        } = self.decode_enrollment(&rec)?;

        let probe = EncryptedTemplate::from_bytes(&ctx, &req.probe)?;
        if let Some(blob) = &req.probe_key {
            let pk = PublicKey::from_bytes(&ctx, blob)?;
            if pk.id() != probe.key_id() {
                return Err(Error::KeyMismatch(
                    "probe is not encrypted under the supplied key".into(),
                ));
            }
        }
        switch_keys.extend(decode_switch_keys(&ctx, &req.switch_keys)?);

        let enrolled = bundle.key_id();
        let probe_key = probe.key_id();
        let (probe, back) = if probe_key == enrolled {
            (probe, None)
        } else {
            let forward = find_switch(&switch_keys, probe_key, enrolled)?;
            let back = find_switch(&switch_keys, enrolled, probe_key)?;
            (probe.key_switch(forward)?, Some(back))
        };

        let mut scores = Vec::with_capacity(templates.len());
        for t in &templates {
            if t.path() != probe.path() || t.dim() != probe.dim() || t.delta() != probe.delta() {
                return Err(protocol_error(
                    ErrorCode::Params,
                    "probe layout differs from the enrolled template",
                ));
            }
            let mut ct = score(t, &probe, &bundle.ek, bundle.gks.as_ref())?;
            if let Some(back) = back {
                ct = key_switch(&ct, back)?;
            }
            scores.push(ct.to_bytes());
        }
        Ok(ScoreResponse { scores })
    }

    /// Run one session over any byte stream until the peer hangs up or the
    /// session is torn down.
    pub fn serve_connection<S: Read + Write>(&self, mut stream: S) -> Result<()> {
        let mut session = ServerSession::new();
        loop {
            let frame = match read_frame(&mut stream, self.config.max_frame) {
                Ok(f) => f,
                Err(FrameError::Closed) => return Ok(()),
                Err(FrameError::Io(e)) => return Err(e.into()),
                Err(e) => {
                    let e = Error::from(e);
                    session.close();
                    let reply = Message::Error {
                        code: error_code(&e),
                        message: error_message(&e),
                    };
                    write_frame(&mut stream, &reply.to_frame())?;
                    return Ok(());
                }
            };
            let reply = session.on_frame(self, &frame);
            write_frame(&mut stream, &reply.to_frame())?;
            if session.is_closed() {
                return Ok(());
            }
        }
    }

    /// Accept TCP connections on `listener`, one thread per session, until
    /// `stop` is set.
    pub fn serve(self: &Arc<Self>, listener: TcpListener, stop: Arc<AtomicBool>) -> Result<()> {
        for stream in listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let server = self.clone();
            std::thread::spawn(move || {
                let _ = stream.set_nodelay(true);
                let _ = server.serve_connection(stream);
            });
        }
        Ok(())
    }

    /// In-process transport: a connected socket pair with this server
    /// running a session on the far end.
    pub fn loopback(self: &Arc<Self>) -> Result<(UnixStream, JoinHandle<Result<()>>)> {
        let (near, far) = UnixStream::pair()?;
        let server = self.clone();
        let thread = std::thread::spawn(move || server.serve_connection(far));
        Ok((near, thread))
    }

    /// Bind `addr` and serve in a background thread.
    pub fn spawn(self: &Arc<Self>, addr: impl ToSocketAddrs) -> Result<ServerHandle> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let server = self.clone();
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            let _ = server.serve(listener, flag);
        });
        Ok(ServerHandle {
            addr: local,
            stop,
            thread: Some(thread),
        })
    }
}

fn decode_switch_keys(ctx: &Arc<FvContext>, blobs: &[Vec<u8>]) -> Result<Vec<KeySwitchKey>> {
    blobs
        .iter()
        .map(|b| KeySwitchKey::from_bytes(ctx, b))
        .collect()
}

fn find_switch(keys: &[KeySwitchKey], from: KeyId, to: KeyId) -> Result<&KeySwitchKey> {
    keys.iter()
        .find(|k| k.source_id() == from && k.target_id() == to)
        .ok_or_else(|| {
            protocol_error(
                ErrorCode::NoSwitchKey,
                format!("no switch key from {from} to {to}"),
            )
        })
}

/// A running TCP server; shuts down on drop.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the accept loop so it observes the flag.
            let _ = TcpStream::connect(self.addr);
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerState {
    AwaitingRequest,
    Closed,
}

/// Per-connection state: one request at a time, anything other than ENROLL
/// or AUTH_REQUEST from the client aborts the session.
#[derive(Clone, Debug)]
pub struct ServerSession {
    state: ServerState,
    pending_identity: Option<String>,
}

impl Default for ServerSession {
    fn default() -> Self {
        Self::new()
    }
}

impl ServerSession {
    pub fn new() -> Self {
        Self {
            state: ServerState::AwaitingRequest,
            pending_identity: None,
        }
    }

    pub fn state(&self) -> ServerState {
        self.state
    }

    pub fn is_closed(&self) -> bool {
        self.state == ServerState::Closed
    }

    /// Identity named by the request being served, if any.
    pub fn pending_identity(&self) -> Option<&str> {
        self.pending_identity.as_deref()
    }

    pub fn close(&mut self) {
        self.state = ServerState::Closed;
    }

    fn abort(&mut self, code: ErrorCode, message: String) -> Message {
        self.close();
        Message::Error { code, message }
    }

    /// Reply to one frame; malformed, out-of-order and forbidden input also
    /// closes the session.
    pub fn on_frame(&mut self, server: &Server, frame: &super::wire::Frame) -> Message {
        if self.is_closed() {
            return Message::Error {
                code: ErrorCode::OutOfOrder,
                message: "session closed".into(),
            };
        }
        if !matches!(frame.kind, MessageType::Enroll | MessageType::AuthRequest) {
            return self.abort(
                ErrorCode::OutOfOrder,
                format!("{:?} is not a client request", frame.kind),
            );
        }
        let msg = match Message::from_frame(frame) {
            Ok(m) => m,
            Err(e) => return self.abort(ErrorCode::Malformed, e.to_string()),
        };
        self.pending_identity = Some(match &msg {
            Message::Enroll(r) => r.identity.clone(),
            Message::AuthRequest(r) => r.identity.clone(),
            _ => unreachable!("request kinds checked above"),
        });
        let reply = server.handle(&msg);
        self.pending_identity = None;
        if let Message::Error { code, .. } = &reply {
            if matches!(code, ErrorCode::Malformed | ErrorCode::Forbidden) {
                self.close();
            }
        }
        reply
    }
}

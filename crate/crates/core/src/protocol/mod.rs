//! Two-party enrollment and authentication over a framed byte stream, with a
//! persistent server-side template store.

mod client;
mod keys;
mod message;
mod server;
mod store;
mod wire;

pub use client::{Aggregation, Client, ClientSession, ClientState, Verification};
pub use keys::{ClientKeys, PublicBundle};
pub use message::{
    check_identity, AuthRequest, EnrollAck, EnrollmentRecord, Message, ScoreResponse,
    MAX_IDENTITY_LEN,
};
pub use server::{
    error_code, AuditLog, Server, ServerConfig, ServerHandle, ServerSession, ServerState,
};
pub use store::TemplateStore;
pub use wire::{
    read_frame, write_frame, ErrorCode, Frame, FrameError, MessageType, DEFAULT_MAX_FRAME,
};

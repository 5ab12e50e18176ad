//! HTTP session service: serves adaptive content to players, persists every
//! result to an append-only log and rebuilds its sessions from that log on
//! restart.

pub mod api;
pub mod log;
pub mod service;

pub use api::router;
pub use log::{read_log, LogError, LogLine, LogWriter, SessionOpened};
pub use service::{
    system_clock, Clock, Content, CreateSession, ModelPoint, ModelResponse, Serve, Service,
    ServiceConfig, ServiceError, SubmitResult, Submitted, CLOCK_SLACK_MS, SESSION_TIMEOUT_MS,
};

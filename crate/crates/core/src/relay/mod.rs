//! Relay: Message Handler server, pipelined client and Mediator over a
//! mutually-authenticated TLS 1.3 framed protocol.

mod client;
mod config;
mod handler;
mod mediator;
mod server;
pub mod tls;
pub mod wire;

use thiserror::Error;

pub use client::RelayClient;
pub use config::{RelayConfig, RemoteCredentials};
pub use handler::{authenticate, MessageHandler};
pub use mediator::Mediator;
pub use server::{serve, serve_on, RunningServer};
pub use wire::{ErrorCode, MethodRef, WireError};

use crate::policy::PolicyError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("TLS configuration error: {0}")]
    TlsConfig(String),
    #[error("cannot bind: {0}")]
    Bind(String),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("TLS handshake rejected: {0}")]
    TlsRejected(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("remote error {0}")]
    Remote(WireError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl RelayError {
    pub fn code(&self) -> &str {
        match self {
            RelayError::Config(_) => "CONFIG_ERROR",
            RelayError::TlsConfig(_) => "TLS_CONFIG_ERROR",
            RelayError::Bind(_) => "BIND_FAILURE",
            RelayError::ConnectionLost(_) => "CONNECTION_LOST",
            RelayError::TlsRejected(_) => "TLS_REJECTED",
            RelayError::Protocol(_) => "MALFORMED",
            RelayError::Remote(e) => e.code.as_str(),
            RelayError::Policy(e) => e.code(),
        }
    }
}

//! Client side of the external detector protocol and the projection from a
//! pixel detection to a grid observation.

mod client;
mod projection;
pub mod protocol;

use thiserror::Error;

pub use client::{query_detector, DetectorClient, Endpoint};
pub use projection::{cell_for_offset, project_detection, CameraModel};
pub use protocol::{DetectionRequest, DetectionResponse, ImageRef, Intrinsics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error("timed out waiting for reply to request {0}")]
    Timeout(u64),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected reply to {expected}, got {got:?}")]
    IdMismatch { expected: u64, got: Option<u64> },
    #[error("request id {0} already used on this connection")]
    DuplicateId(u64),
    #[error("message of {0} bytes exceeds the line limit")]
    PayloadTooLarge(usize),
    #[error("detector reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad endpoint {0:?} (expected tcp://host:port or exec:command)")]
    BadEndpoint(String),
    #[error("projection failed: {0}")]
    Projection(String),
}

impl BridgeError {
    /// Stable category code for logs and exit reporting.
    pub fn code(&self) -> &'static str {
        match self {
            BridgeError::Timeout(_) => "timeout",
            BridgeError::Malformed(_) => "malformed",
            BridgeError::IdMismatch { .. } => "id-mismatch",
            BridgeError::DuplicateId(_) => "duplicate-id",
            BridgeError::PayloadTooLarge(_) => "too-large",
            BridgeError::Remote { .. } => "remote",
            BridgeError::Closed => "closed",
            BridgeError::Io(_) => "io",
            BridgeError::BadEndpoint(_) => "endpoint",
            BridgeError::Projection(_) => "projection",
        }
    }
}

//! Protocol messages and length-delimited framing.
//!
//! A frame is a 4-byte big-endian payload length followed by a JSON
//! [`Envelope`]. Over HTTP the same envelopes travel as request bodies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClientSummary, PROTOCOL_VERSION};
use crate::config::EvalConfig;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame shorter than its 4-byte length prefix")]
    Truncated,
    #[error("frame declares {declared} payload bytes but only {available} follow")]
    Incomplete { declared: usize, available: usize },
    #[error("frame payload is not a valid envelope: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    Hello {
        run_id: String,
        client_id: String,
    },
    ConfigPush {
        run_id: String,
        config: EvalConfig,
    },
    SummarySubmit {
        summary: ClientSummary,
    },
    Ack {
        run_id: String,
        client_id: String,
        replaced: bool,
        run_closed: bool,
    },
    ReportReady {
        run_id: String,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "Hello",
            Message::ConfigPush { .. } => "ConfigPush",
            Message::SummarySubmit { .. } => "SummarySubmit",
            Message::Ack { .. } => "Ack",
            Message::ReportReady { .. } => "ReportReady",
            Message::Error { .. } => "Error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub protocol_version: u32,
    pub message: Message,
}

impl Envelope {
    pub fn new(message: Message) -> Self {
        Envelope {
            protocol_version: PROTOCOL_VERSION,
            message,
        }
    }
}

pub fn encode_frame(env: &Envelope) -> Vec<u8> {
    let payload = serde_json::to_vec(env).expect("envelopes serialize to JSON");
    let len = u32::try_from(payload.len()).expect("frame payload under 4 GiB");
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decodes one frame from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Envelope, usize), FrameError> {
    let prefix: [u8; 4] = bytes.get(..4).ok_or(FrameError::Truncated)?.try_into().expect("4 bytes");
    let declared = u32::from_be_bytes(prefix) as usize;
    let payload = bytes.get(4..4 + declared).ok_or(FrameError::Incomplete {
        declared,
        available: bytes.len() - 4,
    })?;
    Ok((serde_json::from_slice(payload)?, 4 + declared))
}

//! JSON frames exchanged by generated runtimes, one per WebSocket text
//! message.
//!
//! A client opens with `{"connect":"<role>"}`. Once every client role is
//! present the server sends `{"start":true}` to each, and from then on every
//! protocol message is `{"label":"<label>","payload":[...]}` with one array
//! element per declared payload type.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Frame {
    Connect { connect: String },
    Start { start: StartFlag },
    Message { label: String, payload: Vec<Value> },
}

/// Serializes as the literal `true`; anything else fails to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StartFlag;

impl Serialize for StartFlag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_bool(true)
    }
}

impl<'de> Deserialize<'de> for StartFlag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match bool::deserialize(d)? {
            true => Ok(StartFlag),
            false => Err(serde::de::Error::custom("`start` must be true")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame has unexpected fields")]
    UnknownShape,
}

impl Frame {
    pub fn connect(role: impl Into<String>) -> Self {
        Frame::Connect {
            connect: role.into(),
        }
    }

    pub fn start() -> Self {
        Frame::Start { start: StartFlag }
    }

    pub fn message(label: impl Into<String>, payload: Vec<Value>) -> Self {
        Frame::Message {
            label: label.into(),
            payload,
        }
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }

    /// Strict decoding: the object must have exactly the fields of one frame
    /// kind.
    pub fn decode(text: &str) -> Result<Frame, FrameError> {
        let value: Value = serde_json::from_str(text)?;
        let fields = value.as_object().map(|o| o.len()).unwrap_or(0);
        let frame: Frame = serde_json::from_value(value)?;
        let expected = match frame {
            Frame::Connect { .. } | Frame::Start { .. } => 1,
            Frame::Message { .. } => 2,
        };
        if fields != expected {
            return Err(FrameError::UnknownShape);
        }
        Ok(frame)
    }
}

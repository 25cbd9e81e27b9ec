//! Relay wire format.
//!
//! Every frame is a 4-byte big-endian payload length followed by the
//! payload: canonical JSON of an [`Envelope`]. Payloads longer than
//! [`MAX_FRAME_LEN`] are a protocol violation and close the connection.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::canonical;
use crate::policy::{PermittedMethod, PermittedNetwork};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_LEN: u32 = 16_777_216;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    PermittedNetworkInfo,
    PermittedMethods,
    Invoke,
}

impl MessageType {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::PermittedNetworkInfo => "permitted_network_info",
            MessageType::PermittedMethods => "permitted_methods",
            MessageType::Invoke => "invoke",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "permitted_network_info" => Some(MessageType::PermittedNetworkInfo),
            "permitted_methods" => Some(MessageType::PermittedMethods),
            "invoke" => Some(MessageType::Invoke),
            _ => None,
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The closed set of protocol error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Unauthenticated,
    Forbidden,
    NotFound,
    MethodNotPermitted,
    ContractError,
    Malformed,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Unauthenticated => "UNAUTHENTICATED",
            ErrorCode::Forbidden => "FORBIDDEN",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::MethodNotPermitted => "METHOD_NOT_PERMITTED",
            ErrorCode::ContractError => "CONTRACT_ERROR",
            ErrorCode::Malformed => "MALFORMED",
            ErrorCode::Internal => "INTERNAL",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error carried in a failed response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {msg}")]
pub struct WireError {
    pub code: ErrorCode,
    pub msg: String,
}

impl WireError {
    pub fn new(code: ErrorCode, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

/// One request or response.
///
/// Requests carry `v`, `id`, `type` and `body`. Responses additionally carry
/// `ok`, and `error` when `ok` is false. Failed responses have an empty body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    pub id: u64,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
    #[serde(default = "empty_body")]
    pub body: Value,
}

fn empty_body() -> Value {
    Value::Object(Default::default())
}

impl Envelope {
    pub fn request(id: u64, kind: MessageType, body: Value) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            kind: kind.as_str().to_owned(),
            ok: None,
            error: None,
            body,
        }
    }

    pub fn success(id: u64, kind: &str, body: Value) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            kind: kind.to_owned(),
            ok: Some(true),
            error: None,
            body,
        }
    }

    pub fn failure(id: u64, kind: &str, error: WireError) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id,
            kind: kind.to_owned(),
            ok: Some(false),
            error: Some(error),
            body: empty_body(),
        }
    }

    pub fn is_response(&self) -> bool {
        self.ok.is_some()
    }

    pub fn to_json(&self) -> String {
        canonical::to_json(self)
    }

    /// Length-prefixed frame bytes.
    pub fn to_frame(&self) -> Vec<u8> {
        frame(self.to_json().as_bytes())
    }
}

/// `permitted_methods` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PermittedMethodsRequest {
    pub network_id: String,
}

/// `permitted_methods` response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermittedMethodsResponse {
    pub methods: Vec<PermittedMethod>,
}

/// Reference to a granted method on the remote host.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodRef {
    pub permitted_method_id: String,
    pub contract_name: String,
    pub method_name: String,
}

impl From<&PermittedMethod> for MethodRef {
    fn from(m: &PermittedMethod) -> Self {
        Self {
            permitted_method_id: m.id.clone(),
            contract_name: m.contract_name.clone(),
            method_name: m.method_name.clone(),
        }
    }
}

/// `invoke` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InvokeRequest {
    pub permitted_method_id: String,
    pub contract_name: String,
    pub method_name: String,
    pub args: Vec<String>,
}

impl InvokeRequest {
    pub fn new(method: &MethodRef, args: &[String]) -> Self {
        Self {
            permitted_method_id: method.permitted_method_id.clone(),
            contract_name: method.contract_name.clone(),
            method_name: method.method_name.clone(),
            args: args.to_vec(),
        }
    }

    pub fn method_ref(&self) -> MethodRef {
        MethodRef {
            permitted_method_id: self.permitted_method_id.clone(),
            contract_name: self.contract_name.clone(),
            method_name: self.method_name.clone(),
        }
    }
}

/// `invoke` response body: the target method's result, verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvokeResponse {
    pub result: String,
}

/// `permitted_network_info` response body is the record itself.
pub type PermittedNetworkInfoResponse = PermittedNetwork;

pub fn frame(payload: &[u8]) -> Vec<u8> {
    let len = u32::try_from(payload.len()).expect("payload fits the length prefix");
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(payload);
    out
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame length {0} exceeds limit {MAX_FRAME_LEN}")]
    TooLarge(u32),
    #[error("connection ended mid-frame")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read one frame payload. `Ok(None)` on a clean end of stream between
/// frames.
pub async fn read_frame<R: AsyncRead + Unpin>(reader: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut header = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = reader.read(&mut header[filled..]).await?;
        if n == 0 {
            return if filled == 0 {
                Ok(None)
            } else {
                Err(FrameError::Truncated)
            };
        }
        filled += n;
    }
    let len = u32::from_be_bytes(header);
    if len > MAX_FRAME_LEN {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    reader.read_exact(&mut payload).await.map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FrameError::Truncated
        } else {
            FrameError::Io(e)
        }
    })?;
    Ok(Some(payload))
}

pub async fn write_frame<W: AsyncWrite + Unpin>(writer: &mut W, payload: &[u8]) -> std::io::Result<()> {
    writer.write_all(&frame(payload)).await
}

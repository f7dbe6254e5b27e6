//! Typed protocol messages and their canonical JSON payloads.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, MsgType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub node: String,
    /// Set for account clients.
    pub client_id: Option<u32>,
}

/// Ephemeral public shares, base64, keyed by node name. Clients send their
/// own; the server answers with everyone's once the roster is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyExchange {
    pub shares: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateBody {
    /// Fixed-point masked vector, little-endian u64s, base64.
    Masked { values: String },
    Plain { params: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    pub client_id: u32,
    pub round: u64,
    pub body: UpdateBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub round: u64,
    /// No further rounds follow.
    pub last: bool,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingQuery {
    pub nonce: u64,
    pub origin: String,
    pub target: String,
    pub accounts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyBody {
    /// AEAD ciphertext, base64.
    Sealed { ciphertext: String },
    Plain { embeddings: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReply {
    pub nonce: u64,
    pub origin: String,
    pub target: String,
    /// Embeddings of the queried accounts in query order, minus `unknown`.
    pub body: ReplyBody,
    pub unknown: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub nonce: u64,
    pub tx_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub tx_id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub tx_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReply {
    pub nonce: u64,
    pub scores: Vec<ScoredRow>,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    /// Nonce of the request that failed, if any.
    pub nonce: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    Register(Register),
    KeyExchange(KeyExchange),
    ModelUpdate(ModelUpdate),
    GlobalModel(GlobalModel),
    EmbeddingQuery(EmbeddingQuery),
    EmbeddingReply(EmbeddingReply),
    PredictRequest(PredictRequest),
    PredictReply(PredictReply),
    Error(ErrorMsg),
}

/// Canonical JSON: sorted keys, no insignificant whitespace.
pub fn canonical_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    // serde_json's map type is ordered, so going through `Value` sorts keys.
    let value = serde_json::to_value(v)?;
    Ok(serde_json::to_vec(&value)?)
}

fn parse<T: DeserializeOwned>(payload: &[u8]) -> Result<T> {
    serde_json::from_slice(payload).map_err(|e| Error::Frame(format!("bad payload: {e}")))
}

impl ProtocolMessage {
    pub fn msg_type(&self) -> MsgType {
        match self {
            ProtocolMessage::Register(_) => MsgType::Register,
            ProtocolMessage::KeyExchange(_) => MsgType::KeyExchange,
            ProtocolMessage::ModelUpdate(_) => MsgType::ModelUpdate,
            ProtocolMessage::GlobalModel(_) => MsgType::GlobalModel,
            ProtocolMessage::EmbeddingQuery(_) => MsgType::EmbeddingQuery,
            ProtocolMessage::EmbeddingReply(_) => MsgType::EmbeddingReply,
            ProtocolMessage::PredictRequest(_) => MsgType::PredictRequest,
            ProtocolMessage::PredictReply(_) => MsgType::PredictReply,
            ProtocolMessage::Error(_) => MsgType::Error,
        }
    }

    pub fn payload(&self) -> Result<Vec<u8>> {
        match self {
            ProtocolMessage::Register(m) => canonical_json(m),
            ProtocolMessage::KeyExchange(m) => canonical_json(m),
            ProtocolMessage::ModelUpdate(m) => canonical_json(m),
            ProtocolMessage::GlobalModel(m) => canonical_json(m),
            ProtocolMessage::EmbeddingQuery(m) => canonical_json(m),
            ProtocolMessage::EmbeddingReply(m) => canonical_json(m),
            ProtocolMessage::PredictRequest(m) => canonical_json(m),
            ProtocolMessage::PredictReply(m) => canonical_json(m),
            ProtocolMessage::Error(m) => canonical_json(m),
        }
    }

    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(self.msg_type(), self.payload()?)
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let p = &frame.payload;
        Ok(match frame.msg_type {
            MsgType::Register => ProtocolMessage::Register(parse(p)?),
            MsgType::KeyExchange => ProtocolMessage::KeyExchange(parse(p)?),
            MsgType::ModelUpdate => ProtocolMessage::ModelUpdate(parse(p)?),
            MsgType::GlobalModel => ProtocolMessage::GlobalModel(parse(p)?),
            MsgType::EmbeddingQuery => ProtocolMessage::EmbeddingQuery(parse(p)?),
            MsgType::EmbeddingReply => ProtocolMessage::EmbeddingReply(parse(p)?),
            MsgType::PredictRequest => ProtocolMessage::PredictRequest(parse(p)?),
            MsgType::PredictReply => ProtocolMessage::PredictReply(parse(p)?),
            MsgType::Error => ProtocolMessage::Error(parse(p)?),
        })
    }

    /// Request/reply correlation nonce, where the message has one.
    pub fn nonce(&self) -> Option<u64> {
        match self {
            ProtocolMessage::EmbeddingQuery(m) => Some(m.nonce),
            ProtocolMessage::EmbeddingReply(m) => Some(m.nonce),
            ProtocolMessage::PredictRequest(m) => Some(m.nonce),
            ProtocolMessage::PredictReply(m) => Some(m.nonce),
            ProtocolMessage::Error(m) => m.nonce,
            _ => None,
        }
    }
}

pub fn b64_encode(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn b64_decode(s: &str) -> Result<Vec<u8>> {
    B64.decode(s).map_err(|e| Error::Frame(format!("bad base64: {e}")))
}

pub fn encode_u64s(values: &[u64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    b64_encode(&bytes)
}

pub fn decode_u64s(s: &str) -> Result<Vec<u64>> {
    let bytes = b64_decode(s)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Frame("u64 vector length is not a multiple of 8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

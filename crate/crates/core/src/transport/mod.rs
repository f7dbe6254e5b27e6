//! Framed message delivery: a deterministic in-process bus with a full
//! transcript, and a loopback TCP network speaking the same frames.

mod bus;
mod frame;
mod message;
mod tcp;
mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bus::InProcessBus;
pub use frame::{Frame, MsgType, HEADER_LEN, MAX_PAYLOAD};
pub use message::{
    b64_decode, b64_encode, canonical_json, decode_u64s, encode_u64s, EmbeddingQuery, EmbeddingReply,
    ErrorMsg, GlobalModel, KeyExchange, ModelUpdate, PredictReply, PredictRequest, ProtocolMessage,
    Register, ReplyBody, RowError, ScoredRow, UpdateBody,
};
pub use tcp::TcpNetwork;
pub use transcript::{Transcript, TranscriptEntry};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub from: String,
    pub to: String,
    pub message: ProtocolMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub seq: u64,
    pub bytes: usize,
}

pub trait Network {
    fn register(&mut self, node: &str) -> Result<()>;
    /// Removes a node; frames still queued for it are dropped.
    fn unregister(&mut self, node: &str);
    fn is_registered(&self, node: &str) -> bool;
    fn send(&mut self, from: &str, to: &str, msg: &ProtocolMessage) -> Result<Receipt>;
    /// The next frame to hand to its receiver, or `None` once nothing is in flight.
    fn next_delivery(&mut self) -> Result<Option<Delivery>>;
    fn transcript(&self) -> &Transcript;
}

/// How embedding traffic travels between the transaction and account clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMode {
    /// Queries and replies are relayed by the server.
    #[default]
    ServerRouted,
    /// Queries and replies go directly between the two clients.
    P2p,
}

impl fmt::Display for RouteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RouteMode::ServerRouted => "server",
            RouteMode::P2p => "p2p",
        })
    }
}

impl FromStr for RouteMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "server" | "server_routed" => Ok(RouteMode::ServerRouted),
            "p2p" => Ok(RouteMode::P2p),
            other => Err(Error::config(format!("unknown route mode {other:?}"))),
        }
    }
}

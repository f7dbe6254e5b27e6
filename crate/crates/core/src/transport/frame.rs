//! Wire format: `[u32 BE payload length][u8 message type][payload]`.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    Register = 0x01,
    KeyExchange = 0x02,
    ModelUpdate = 0x03,
    GlobalModel = 0x04,
    EmbeddingQuery = 0x05,
    EmbeddingReply = 0x06,
    PredictRequest = 0x07,
    PredictReply = 0x08,
    Error = 0x7F,
}

impl MsgType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Register => "register",
            MsgType::KeyExchange => "key_exchange",
            MsgType::ModelUpdate => "model_update",
            MsgType::GlobalModel => "global_model",
            MsgType::EmbeddingQuery => "embedding_query",
            MsgType::EmbeddingReply => "embedding_reply",
            MsgType::PredictRequest => "predict_request",
            MsgType::PredictReply => "predict_reply",
            MsgType::Error => "error",
        }
    }
}

impl TryFrom<u8> for MsgType {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        Ok(match b {
            0x01 => MsgType::Register,
            0x02 => MsgType::KeyExchange,
            0x03 => MsgType::ModelUpdate,
            0x04 => MsgType::GlobalModel,
            0x05 => MsgType::EmbeddingQuery,
            0x06 => MsgType::EmbeddingReply,
            0x07 => MsgType::PredictRequest,
            0x08 => MsgType::PredictReply,
            0x7F => MsgType::Error,
            other => return Err(Error::Frame(format!("unknown message type 0x{other:02x}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Result<Self> {
        if payload.len() > MAX_PAYLOAD {
            return Err(Error::Frame(format!(
                "payload of {} bytes exceeds the {MAX_PAYLOAD}-byte cap",
                payload.len()
            )));
        }
        Ok(Frame { msg_type, payload })
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.msg_type.code());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (frame, used) = Self::decode_prefix(bytes)?
            .ok_or_else(|| Error::Frame(format!("truncated frame ({} bytes)", bytes.len())))?;
        if used != bytes.len() {
            return Err(Error::Frame(format!(
                "{} trailing bytes after frame",
                bytes.len() - used
            )));
        }
        Ok(frame)
    }

    /// Decodes a frame from the front of `bytes`, returning it and the bytes
    /// consumed, or `None` if more input is needed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<Option<(Self, usize)>> {
        if bytes.len() < HEADER_LEN {
            return Ok(None);
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Frame(format!("declared length {len} exceeds cap")));
        }
        let msg_type = MsgType::try_from(bytes[4])?;
        if bytes.len() < HEADER_LEN + len {
            return Ok(None);
        }
        let payload = bytes[HEADER_LEN..HEADER_LEN + len].to_vec();
        Ok(Some((Frame { msg_type, payload }, HEADER_LEN + len)))
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.encode())
    }

    /// Reads one frame; `Ok(None)` on a clean end of stream.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>> {
        let mut header = [0u8; HEADER_LEN];
        match r.read_exact(&mut header[..1]) {
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            other => other?,
        }
        r.read_exact(&mut header[1..])?;
        let len = u32::from_be_bytes(header[..4].try_into().expect("4 bytes")) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Frame(format!("declared length {len} exceeds cap")));
        }
        let msg_type = MsgType::try_from(header[4])?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame { msg_type, payload }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_is_big_endian() {
        let f = Frame::new(MsgType::PredictReply, b"hello".to_vec()).unwrap();
        let b = f.encode();
        assert_eq!(&b[..5], &[0, 0, 0, 5, 0x08]);
        assert_eq!(Frame::decode(&b).unwrap(), f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Frame::decode(&[0, 0, 0, 0, 0x09]).is_err());
        assert!(Frame::decode(&[0, 0, 0, 2, 0x01, b'{']).is_err());
        assert!(Frame::decode(&[0, 0, 0, 0, 0x01, 0]).is_err());
        assert!(Frame::decode(&[0xff, 0xff, 0xff, 0xff, 0x01]).is_err());
        assert!(Frame::new(MsgType::Error, vec![0; MAX_PAYLOAD + 1]).is_err());
    }

    #[test]
    fn stream_round_trip() {
        let a = Frame::new(MsgType::Register, b"{}".to_vec()).unwrap();
        let b = Frame::new(MsgType::Error, vec![]).unwrap();
        let mut buf = a.encode();
        buf.extend(b.encode());
        let mut r = &buf[..];
        assert_eq!(Frame::read_from(&mut r).unwrap(), Some(a));
        assert_eq!(Frame::read_from(&mut r).unwrap(), Some(b));
        assert_eq!(Frame::read_from(&mut r).unwrap(), None);
    }
}

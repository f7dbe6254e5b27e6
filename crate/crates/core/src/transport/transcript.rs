use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::frame::{Frame, MsgType};
use super::message::{b64_encode, ProtocolMessage};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    /// Logical send time; strictly increasing.
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub frame: Frame,
}

impl TranscriptEntry {
    pub fn msg_type(&self) -> MsgType {
        self.frame.msg_type
    }

    pub fn message(&self) -> Result<ProtocolMessage> {
        ProtocolMessage::from_frame(&self.frame)
    }
}

#[derive(Serialize, Deserialize)]
struct Line<'a> {
    seq: u64,
    from: &'a str,
    to: &'a str,
    #[serde(rename = "type")]
    msg_type: String,
    frame: String,
}

/// Append-only log of every frame handed to the transport.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub(crate) fn push(&mut self, from: &str, to: &str, frame: Frame) -> u64 {
        let seq = self.entries.len() as u64;
        self.entries.push(TranscriptEntry {
            seq,
            from: from.to_string(),
            to: to.to_string(),
            frame,
        });
        seq
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frames on one directed channel, in send order.
    pub fn channel<'a>(&'a self, from: &'a str, to: &'a str) -> impl Iterator<Item = &'a TranscriptEntry> + 'a {
        self.entries.iter().filter(move |e| e.from == from && e.to == to)
    }

    pub fn count(&self, t: MsgType) -> usize {
        self.entries.iter().filter(|e| e.msg_type() == t).count()
    }

    /// Sorted `(from, to, frame bytes)` per channel: the part of a run that
    /// does not depend on how channels interleave.
    pub fn per_channel(&self) -> std::collections::BTreeMap<(String, String), Vec<Vec<u8>>> {
        let mut out: std::collections::BTreeMap<(String, String), Vec<Vec<u8>>> = Default::default();
        for e in &self.entries {
            out.entry((e.from.clone(), e.to.clone()))
                .or_default()
                .push(e.frame.encode());
        }
        out
    }

    /// JSON-lines dump, one frame per line, frame bytes in base64.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let line = Line {
                seq: e.seq,
                from: &e.from,
                to: &e.to,
                msg_type: format!("0x{:02x}", e.msg_type().code()),
                frame: b64_encode(&e.frame.encode()),
            };
            let _ = writeln!(s, "{}", serde_json::to_string(&line).expect("plain struct"));
        }
        s
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

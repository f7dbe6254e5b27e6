use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::frame::Frame;
use super::message::ProtocolMessage;
use super::transcript::Transcript;
use super::{Delivery, Network, Receipt};
use crate::error::{Error, Result};
use crate::seed;

type Channel = (String, String);

/// In-process transport: FIFO per directed channel, with the next channel to
/// deliver from drawn by a seeded scheduler.
#[derive(Debug)]
pub struct InProcessBus {
    nodes: BTreeSet<String>,
    queues: BTreeMap<Channel, VecDeque<Frame>>,
    rng: ChaCha8Rng,
    transcript: Transcript,
}

impl InProcessBus {
    pub fn new(seed: u64) -> Self {
        InProcessBus {
            nodes: BTreeSet::new(),
            queues: BTreeMap::new(),
            rng: seed::rng(seed::derive(seed, "scheduler")),
            transcript: Transcript::default(),
        }
    }

    fn pop(&mut self, filter: impl Fn(&Channel) -> bool) -> Result<Option<Delivery>> {
        let ready: Vec<Channel> = self
            .queues
            .iter()
            .filter(|(k, q)| !q.is_empty() && filter(k))
            .map(|(k, _)| k.clone())
            .collect();
        if ready.is_empty() {
            return Ok(None);
        }
        let pick = ready[self.rng.random_range(0..ready.len())].clone();
        let frame = self
            .queues
            .get_mut(&pick)
            .and_then(VecDeque::pop_front)
            .expect("non-empty queue");
        Ok(Some(Delivery {
            from: pick.0,
            to: pick.1,
            message: ProtocolMessage::from_frame(&frame)?,
        }))
    }

    /// Next message addressed to `node`, if any is queued.
    pub fn recv(&mut self, node: &str) -> Result<Option<Delivery>> {
        self.pop(|(_, to)| to == node)
    }
}

impl Network for InProcessBus {
    fn register(&mut self, node: &str) -> Result<()> {
        if !self.nodes.insert(node.to_string()) {
            return Err(Error::Transport(format!("{node} registered twice")));
        }
        Ok(())
    }

    fn unregister(&mut self, node: &str) {
        self.nodes.remove(node);
        self.queues.retain(|(_, to), _| to != node);
    }

    fn is_registered(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    fn send(&mut self, from: &str, to: &str, msg: &ProtocolMessage) -> Result<Receipt> {
        if !self.nodes.contains(from) {
            return Err(Error::Transport(format!("unknown sender {from}")));
        }
        if !self.nodes.contains(to) {
            return Err(Error::Transport(format!("unknown receiver {to}")));
        }
        let frame = msg.to_frame()?;
        let bytes = frame.encoded_len();
        self.queues
            .entry((from.to_string(), to.to_string()))
            .or_default()
            .push_back(frame.clone());
        let seq = self.transcript.push(from, to, frame);
        Ok(Receipt { seq, bytes })
    }

    fn next_delivery(&mut self) -> Result<Option<Delivery>> {
        self.pop(|_| true)
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::message::ErrorMsg;

    fn msg(i: u64) -> ProtocolMessage {
        ProtocolMessage::Error(ErrorMsg {
            nonce: Some(i),
            message: String::new(),
        })
    }

    #[test]
    fn fifo_per_channel() {
        let mut bus = InProcessBus::new(1);
        for n in ["a", "b", "c"] {
            bus.register(n).unwrap();
        }
        for i in 0..20 {
            bus.send("a", "c", &msg(i)).unwrap();
            bus.send("b", "c", &msg(100 + i)).unwrap();
        }
        let (mut from_a, mut from_b) = (vec![], vec![]);
        while let Some(d) = bus.next_delivery().unwrap() {
            let n = d.message.nonce().unwrap();
            if d.from == "a" { from_a.push(n) } else { from_b.push(n) }
        }
        assert_eq!(from_a, (0..20).collect::<Vec<_>>());
        assert_eq!(from_b, (100..120).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_receiver() {
        let mut bus = InProcessBus::new(1);
        bus.register("a").unwrap();
        assert!(bus.send("a", "zz", &msg(0)).is_err());
        assert!(bus.transcript().is_empty());
    }
}

use std::collections::{BTreeMap, BTreeSet};

use super::{aggregate, parse_account_node, Out, RoundSchedule};
use crate::error::{Error, Result};
use crate::privacy::{unmask_sum, MaskedUpdate};
use crate::transport::{
    decode_u64s, EmbeddingQuery, ErrorMsg, GlobalModel, KeyExchange, ModelUpdate, ProtocolMessage,
    UpdateBody,
};

/// Aggregation server. Relays key shares and (in server-routed mode)
/// embedding traffic; averages account-client model updates each round.
#[derive(Debug)]
pub struct Server {
    name: String,
    clients: BTreeSet<u32>,
    /// Everyone expected to take part in the key exchange.
    roster: BTreeSet<String>,
    registered: BTreeSet<String>,
    shares: BTreeMap<String, String>,
    shares_sent: bool,
    schedule: RoundSchedule,
    weighted: bool,
    round: u64,
    updates: BTreeMap<u32, UpdateBody>,
    finished: bool,
    /// Forwarded query nonce → the node that asked.
    forwarded: BTreeMap<u64, String>,
}

impl Server {
    pub(crate) fn new(name: &str, clients: BTreeSet<u32>, roster: BTreeSet<String>, schedule: RoundSchedule, weighted: bool) -> Self {
        Server {
            name: name.to_string(),
            clients,
            roster,
            registered: BTreeSet::new(),
            shares: BTreeMap::new(),
            shares_sent: false,
            schedule,
            weighted,
            round: 0,
            updates: BTreeMap::new(),
            finished: false,
            forwarded: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn registered(&self) -> &BTreeSet<String> {
        &self.registered
    }

    /// Clients whose update for the current round has not arrived.
    pub fn missing_updates(&self) -> Vec<u32> {
        self.clients
            .iter()
            .filter(|c| !self.updates.contains_key(c))
            .copied()
            .collect()
    }

    /// Broadcasts the initial model to every account client.
    pub(crate) fn start(&mut self, init: Vec<f64>) -> Vec<Out> {
        self.round = 0;
        self.finished = false;
        self.updates.clear();
        self.broadcast(init, false)
    }

    fn broadcast(&self, params: Vec<f64>, last: bool) -> Vec<Out> {
        self.clients
            .iter()
            .map(|&c| {
                Out::new(
                    super::account_node(c),
                    ProtocolMessage::GlobalModel(GlobalModel {
                        round: self.round,
                        last,
                        params: params.clone(),
                    }),
                )
            })
            .collect()
    }

    pub(crate) fn handle(&mut self, from: &str, msg: ProtocolMessage) -> Result<Vec<Out>> {
        match msg {
            ProtocolMessage::Register(r) => {
                if r.node != from {
                    return Err(Error::protocol(format!("{from} registered as {}", r.node)));
                }
                self.registered.insert(from.to_string());
                Ok(vec![])
            }
            ProtocolMessage::KeyExchange(k) => self.on_share(from, k),
            ProtocolMessage::ModelUpdate(u) => self.on_update(from, u),
            ProtocolMessage::EmbeddingQuery(q) => {
                if q.origin != from {
                    return Err(Error::protocol(format!("{from} relayed a query as {}", q.origin)));
                }
                self.forwarded.insert(q.nonce, from.to_string());
                let to = q.target.clone();
                Ok(vec![Out::new(to, ProtocolMessage::EmbeddingQuery(q))])
            }
            ProtocolMessage::EmbeddingReply(r) => {
                if self.forwarded.remove(&r.nonce).is_none() {
                    return Err(Error::protocol(format!("reply {} matches no forwarded query", r.nonce)));
                }
                let to = r.target.clone();
                Ok(vec![Out::new(to, ProtocolMessage::EmbeddingReply(r))])
            }
            other => Err(Error::protocol(format!(
                "server cannot handle {} from {from}",
                other.msg_type().name()
            ))),
        }
    }

    /// A forward failed: tell the asker instead of stalling it.
    pub(crate) fn undeliverable(&mut self, to: &str, msg: ProtocolMessage, reason: &str) -> Result<Vec<Out>> {
        match msg {
            ProtocolMessage::EmbeddingQuery(EmbeddingQuery { nonce, origin, .. }) => {
                self.forwarded.remove(&nonce);
                Ok(vec![Out::new(
                    origin,
                    ProtocolMessage::Error(ErrorMsg {
                        nonce: Some(nonce),
                        message: format!("{to} unreachable: {reason}"),
                    }),
                )])
            }
            other => Err(Error::protocol(format!(
                "server could not deliver {} to {to}: {reason}",
                other.msg_type().name()
            ))),
        }
    }

    fn on_share(&mut self, from: &str, k: KeyExchange) -> Result<Vec<Out>> {
        if !self.roster.contains(from) {
            return Err(Error::protocol(format!("key share from unexpected node {from}")));
        }
        let share = k
            .shares
            .get(from)
            .ok_or_else(|| Error::protocol(format!("{from} sent no share of its own")))?;
        self.shares.insert(from.to_string(), share.clone());
        if self.shares_sent || self.shares.len() < self.roster.len() {
            return Ok(vec![]);
        }
        self.shares_sent = true;
        let all = KeyExchange {
            shares: self.shares.clone(),
        };
        Ok(self
            .roster
            .iter()
            .map(|n| Out::new(n.clone(), ProtocolMessage::KeyExchange(all.clone())))
            .collect())
    }

    fn on_update(&mut self, from: &str, u: ModelUpdate) -> Result<Vec<Out>> {
        if parse_account_node(from) != Some(u.client_id) || !self.clients.contains(&u.client_id) {
            return Err(Error::protocol(format!("update from {from} claims client {}", u.client_id)));
        }
        if self.finished || u.round != self.round {
            return Err(Error::protocol(format!(
                "update from {from} for round {}, server is at round {}",
                u.round, self.round
            )));
        }
        if self.updates.insert(u.client_id, u.body).is_some() {
            return Err(Error::protocol(format!("second update from {from} in round {}", u.round)));
        }
        if self.updates.len() < self.clients.len() {
            return Ok(vec![]);
        }
        let params = self.combine()?;
        self.updates.clear();
        self.round += 1;
        let last = self.round as usize >= self.schedule.rounds;
        self.finished = last;
        Ok(self.broadcast(params, last))
    }

    fn combine(&self) -> Result<Vec<f64>> {
        let m = self.updates.len() as f64;
        let plain = self.updates.values().all(|b| matches!(b, UpdateBody::Plain { .. }));
        let masked = self.updates.values().all(|b| matches!(b, UpdateBody::Masked { .. }));
        let summed: Vec<f64> = if plain {
            let vs: Vec<Vec<f64>> = self
                .updates
                .values()
                .map(|b| match b {
                    UpdateBody::Plain { params } => params.clone(),
                    UpdateBody::Masked { .. } => unreachable!(),
                })
                .collect();
            if !self.weighted {
                return aggregate(&vs);
            }
            aggregate(&vs)?.into_iter().map(|x| x * m).collect()
        } else if masked {
            let ups = self
                .updates
                .iter()
                .map(|(&id, b)| match b {
                    UpdateBody::Masked { values } => Ok(MaskedUpdate {
                        client_id: id,
                        round: self.round,
                        values: decode_u64s(values)?,
                    }),
                    UpdateBody::Plain { .. } => unreachable!(),
                })
                .collect::<Result<Vec<_>>>()?;
            let sum = unmask_sum(&ups)?;
            if !self.weighted {
                return Ok(sum.into_iter().map(|x| x / m).collect());
            }
            sum
        } else {
            return Err(Error::protocol("clients mixed masked and plain updates"));
        };
        // Weighted: clients sent N_m·θ_m with N_m appended.
        let (total, rest) = summed
            .split_last()
            .ok_or_else(|| Error::protocol("empty weighted update"))?;
        if !(*total > 0.0) {
            return Err(Error::protocol("weighted update with zero total weight"));
        }
        Ok(rest.iter().map(|x| x / total).collect())
    }

}

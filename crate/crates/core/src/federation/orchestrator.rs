use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::account::AccountClient;
use super::server::Server;
use super::tx::TxClient;
use super::{account_node, LocalFit, Out, ProtocolConfig, TrainPlan, DRIVER, SERVER, TX};
use crate::data::{AccountShard, TransactionRecord};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Autoencoder;
use crate::privacy::{Identity, PublicShare};
use crate::seed;
use crate::transport::{Network, PredictRequest, ProtocolMessage, RouteMode, Transcript};

#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    /// Transaction-client row indices, one per matrix row.
    pub rows: Vec<usize>,
    /// `[sender embedding, receiver embedding, transaction features]` per row.
    pub matrix: Matrix,
    /// Rows left out, with the reason.
    pub errors: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOutcome {
    pub scores: Vec<(u64, f64)>,
    pub errors: Vec<(u64, String)>,
}

/// Runs every node of one deployment over a transport. Nodes only interact
/// through messages; the orchestrator kicks off phases and pumps deliveries
/// until the network is quiet, which is the round barrier.
pub struct Federation<N: Network> {
    net: N,
    config: ProtocolConfig,
    server: Server,
    accounts: BTreeMap<String, AccountClient>,
    tx: TxClient,
    driver_inbox: Vec<ProtocolMessage>,
    next_request: u64,
    learning_started: bool,
}

impl<N: Network> std::fmt::Debug for Federation<N> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Federation")
            .field("clients", &self.accounts.len())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn identity(seed: u64, name: &str) -> Identity {
    Identity::from_seed(name, seed::derive(seed, &format!("identity/{name}")))
}

impl<N: Network> Federation<N> {
    /// Sets up the nodes, registers them with the server and, in secure mode,
    /// runs the key exchange. Static public keys and the account → client
    /// directory are provisioned out of band.
    pub fn new(
        mut net: N,
        shards: &[AccountShard],
        transactions: Vec<TransactionRecord>,
        config: ProtocolConfig,
    ) -> Result<Self> {
        config.validate()?;
        if shards.is_empty() {
            return Err(Error::config("at least one account client is required"));
        }
        let mut directory = BTreeMap::new();
        for s in shards {
            for r in &s.records {
                if directory.insert(r.account_id.clone(), s.client_id).is_some() {
                    return Err(Error::invalid(format!("account {} held by two clients", r.account_id)));
                }
            }
        }
        let names: Vec<String> = shards.iter().map(|s| account_node(s.client_id)).collect();
        let mut statics: BTreeMap<String, PublicShare> = BTreeMap::new();
        for n in names.iter().map(String::as_str).chain([TX]) {
            statics.insert(n.to_string(), identity(config.seed, n).static_public());
        }
        let init = Autoencoder::from_config(&config.autoencoder, config.init_seed());
        let mut accounts = BTreeMap::new();
        for (s, name) in shards.iter().zip(&names) {
            let client = AccountClient::new(
                s,
                init.clone(),
                config.client_train_spec(s.client_id),
                config.schedule,
                config.secure,
                config.weighted,
                identity(config.seed, name),
                statics.clone(),
            )?;
            if accounts.insert(name.clone(), client).is_some() {
                return Err(Error::config(format!("duplicate client id in {name}")));
            }
        }
        let tx = TxClient::new(
            transactions,
            directory,
            config.autoencoder.latent_dim,
            config.route,
            config.secure,
            identity(config.seed, TX),
            statics,
        );
        let clients: BTreeSet<u32> = shards.iter().map(|s| s.client_id).collect();
        let mut roster: BTreeSet<String> = names.iter().cloned().collect();
        roster.insert(TX.into());
        let server = Server::new(SERVER, clients, roster.clone(), config.schedule, config.weighted);

        net.register(SERVER)?;
        net.register(TX)?;
        net.register(DRIVER)?;
        for n in &names {
            net.register(n)?;
        }
        let mut fed = Federation {
            net,
            config,
            server,
            accounts,
            tx,
            driver_inbox: Vec::new(),
            next_request: 1,
            learning_started: false,
        };
        let hellos: Vec<(String, Vec<Out>)> = fed
            .accounts
            .iter()
            .map(|(n, a)| (n.clone(), a.hello()))
            .chain([(TX.to_string(), fed.tx.hello())])
            .collect();
        for (from, outs) in hellos {
            fed.send_all(&from, outs)?;
        }
        fed.pump()?;
        if fed.server.registered() != &roster {
            let missing: Vec<&String> = roster.difference(fed.server.registered()).collect();
            return Err(Error::protocol(format!("registration incomplete, missing {missing:?}")));
        }
        Ok(fed)
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn transcript(&self) -> &Transcript {
        self.net.transcript()
    }

    pub fn network(&self) -> &N {
        &self.net
    }

    pub fn server(&self) -> &Server {
        &self.server
    }

    pub fn tx(&self) -> &TxClient {
        &self.tx
    }

    pub fn account(&self, client_id: u32) -> Option<&AccountClient> {
        self.accounts.get(&account_node(client_id))
    }

    pub fn account_clients(&self) -> impl Iterator<Item = &AccountClient> {
        self.accounts.values()
    }

    /// Only allowed before feature learning begins.
    pub fn set_route_mode(&mut self, route: RouteMode) -> Result<()> {
        if self.learning_started {
            return Err(Error::config("route mode cannot change once the protocol is running"));
        }
        self.config.route = route;
        self.tx.set_route(route);
        Ok(())
    }

    /// Takes an account client off the network (fault injection).
    pub fn remove_account_client(&mut self, client_id: u32) -> Result<()> {
        let name = account_node(client_id);
        if self.accounts.remove(&name).is_none() {
            return Err(Error::config(format!("no client {name}")));
        }
        self.net.unregister(&name);
        Ok(())
    }

    /// Phase 1: `rounds` rounds of local training and aggregation. Returns the
    /// final global autoencoder, which every account client now holds.
    pub fn run_feature_learning(&mut self) -> Result<Autoencoder> {
        self.learning_started = true;
        let init = Autoencoder::from_config(&self.config.autoencoder, self.config.init_seed());
        let outs = self.server.start(init.flatten());
        self.send_all(SERVER, outs)?;
        self.pump()?;
        if !self.server.finished() {
            let missing: Vec<String> = self
                .server
                .missing_updates()
                .into_iter()
                .map(account_node)
                .collect();
            return Err(Error::protocol(format!(
                "round {} did not complete; no update from {missing:?}",
                self.server.round()
            )));
        }
        let mut models = self.accounts.values().map(|a| (a.ready(), a.model()));
        let (_, first) = models.next().expect("at least one client");
        let first = first.clone();
        for (ready, m) in models.chain([(true, &first)]) {
            if !ready || *m != first {
                return Err(Error::protocol("account clients disagree on the final model"));
            }
        }
        Ok(first)
    }

    /// Phase 2: fetches embeddings for both endpoints of each row and joins
    /// them with the transaction features.
    pub fn extract_and_join(&mut self, rows: &[usize]) -> Result<JoinOutcome> {
        let (job, outs) = self.tx.start_join(rows.to_vec())?;
        self.send_all(TX, outs)?;
        self.pump()?;
        let j = self
            .tx
            .take_joined(job)
            .ok_or_else(|| Error::protocol("embedding join did not complete"))?;
        Ok(JoinOutcome {
            rows: j.rows,
            matrix: j.matrix,
            errors: j.errors,
        })
    }

    /// Phase 3, entirely on the transaction client.
    pub fn train_phase(&mut self, joined: &Matrix, labels: &[u8], plan: &TrainPlan) -> Result<LocalFit> {
        self.tx.train(joined, labels, plan)
    }

    /// Inference: a driver asks the transaction client to score transactions;
    /// it re-queries the account clients and predicts on clean features.
    pub fn infer(&mut self, tx_ids: &[u64]) -> Result<PredictOutcome> {
        let nonce = self.next_request;
        self.next_request += 1;
        let req = ProtocolMessage::PredictRequest(PredictRequest {
            nonce,
            tx_ids: tx_ids.to_vec(),
        });
        self.send_all(DRIVER, vec![Out::new(TX, req)])?;
        self.pump()?;
        let pos = self
            .driver_inbox
            .iter()
            .position(|m| matches!(m, ProtocolMessage::PredictReply(r) if r.nonce == nonce))
            .ok_or_else(|| Error::protocol(format!("no reply to prediction request {nonce}")))?;
        let ProtocolMessage::PredictReply(r) = self.driver_inbox.remove(pos) else {
            unreachable!()
        };
        Ok(PredictOutcome {
            scores: r.scores.into_iter().map(|s| (s.tx_id, s.score)).collect(),
            errors: r.errors.into_iter().map(|e| (e.tx_id, e.reason)).collect(),
        })
    }

    fn pump(&mut self) -> Result<()> {
        while let Some(d) = self.net.next_delivery()? {
            let outs = self.dispatch(&d.from, &d.to, d.message).map_err(|e| match e {
                Error::Protocol(m) => Error::Protocol(format!("{} <- {}: {m}", d.to, d.from)),
                other => other,
            })?;
            self.send_all(&d.to, outs)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, from: &str, to: &str, msg: ProtocolMessage) -> Result<Vec<Out>> {
        match to {
            SERVER => self.server.handle(from, msg),
            TX => self.tx.handle(from, msg),
            DRIVER => {
                self.driver_inbox.push(msg);
                Ok(vec![])
            }
            other => match self.accounts.get_mut(other) {
                Some(a) => a.handle(from, msg),
                None => Err(Error::Transport(format!("delivery to unknown node {other}"))),
            },
        }
    }

    fn send_all(&mut self, from: &str, outs: Vec<Out>) -> Result<()> {
        let mut queue: VecDeque<Out> = outs.into();
        while let Some(o) = queue.pop_front() {
            match self.net.send(from, &o.to, &o.msg) {
                Ok(_) => {}
                Err(Error::Transport(reason)) => {
                    let more = match from {
                        SERVER => self.server.undeliverable(&o.to, o.msg, &reason)?,
                        TX => self.tx.undeliverable(&o.to, o.msg, &reason)?,
                        _ => return Err(Error::Transport(format!("{from} -> {}: {reason}", o.to))),
                    };
                    queue.extend(more);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::account::{decode_share, reply_aad};
use super::{account_node, fit_transaction_model, parse_account_node, LocalFit, Out, TrainPlan, SERVER, TX};
use crate::data::{AccountId, TransactionRecord, TX_FEATURES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Classifier;
use crate::privacy::{open_embeddings, Identity, NormStats, Opener, PublicShare};
use crate::transport::{
    b64_decode, b64_encode, EmbeddingQuery, EmbeddingReply, KeyExchange, PredictReply, ProtocolMessage, Register,
    ReplyBody, RouteMode, RowError, ScoredRow,
};

#[derive(Debug, Clone, PartialEq)]
enum JobKind {
    Join,
    Predict { requester: String, nonce: u64 },
}

#[derive(Debug)]
struct Job {
    kind: JobKind,
    rows: Vec<usize>,
    pending: BTreeSet<u64>,
    embeddings: HashMap<AccountId, Vec<f64>>,
    failed: BTreeMap<AccountId, String>,
}

/// Joined rows of a finished job plus the rows that could not be joined.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Joined {
    pub rows: Vec<usize>,
    pub matrix: Matrix,
    pub errors: Vec<(usize, String)>,
}

/// The transaction client: owns transaction rows and labels, the classifier
/// and its normalisation statistics. It never sees model parameters.
pub struct TxClient {
    rows: Vec<TransactionRecord>,
    by_tx_id: HashMap<u64, usize>,
    directory: BTreeMap<AccountId, u32>,
    latent_dim: usize,
    route: RouteMode,
    secure: bool,
    identity: Identity,
    statics: BTreeMap<String, PublicShare>,
    openers: BTreeMap<String, Opener>,
    next_nonce: u64,
    next_job: u64,
    jobs: BTreeMap<u64, Job>,
    queries: BTreeMap<u64, (u64, String, Vec<String>)>,
    finished: BTreeMap<u64, Joined>,
    /// Unknown transaction ids of a prediction job, reported with its reply.
    pending_unknown: BTreeMap<u64, Vec<RowError>>,
    classifier: Option<Classifier>,
    stats: Option<NormStats>,
}

impl std::fmt::Debug for TxClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TxClient")
            .field("rows", &self.rows.len())
            .field("route", &self.route)
            .field("trained", &self.classifier.is_some())
            .finish()
    }
}

impl TxClient {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        rows: Vec<TransactionRecord>,
        directory: BTreeMap<AccountId, u32>,
        latent_dim: usize,
        route: RouteMode,
        secure: bool,
        identity: Identity,
        statics: BTreeMap<String, PublicShare>,
    ) -> Self {
        let by_tx_id = rows.iter().enumerate().map(|(i, r)| (r.tx_id, i)).collect();
        TxClient {
            rows,
            by_tx_id,
            directory,
            latent_dim,
            route,
            secure,
            identity,
            statics,
            openers: BTreeMap::new(),
            next_nonce: 1,
            next_job: 1,
            jobs: BTreeMap::new(),
            queries: BTreeMap::new(),
            finished: BTreeMap::new(),
            pending_unknown: BTreeMap::new(),
            classifier: None,
            stats: None,
        }
    }

    pub(crate) fn set_route(&mut self, route: RouteMode) {
        self.route = route;
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, idx: usize) -> &TransactionRecord {
        &self.rows[idx]
    }

    pub fn classifier(&self) -> Option<&Classifier> {
        self.classifier.as_ref()
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.stats.as_ref()
    }

    pub fn joined_dim(&self) -> usize {
        2 * self.latent_dim + TX_FEATURES
    }

    pub(crate) fn hello(&self) -> Vec<Out> {
        let mut out = vec![Out::new(
            SERVER,
            ProtocolMessage::Register(Register {
                node: TX.into(),
                client_id: None,
            }),
        )];
        if self.secure {
            out.push(Out::new(
                SERVER,
                ProtocolMessage::KeyExchange(KeyExchange {
                    shares: [(TX.to_string(), b64_encode(&self.identity.ephemeral_public()))].into(),
                }),
            ));
        }
        out
    }

    /// Queries embeddings for both endpoints of `rows`, one query per owning
    /// client, each account asked for once.
    pub(crate) fn start_join(&mut self, rows: Vec<usize>) -> Result<(u64, Vec<Out>)> {
        self.start_job(rows, JobKind::Join)
    }

    pub(crate) fn take_joined(&mut self, job: u64) -> Option<Joined> {
        self.finished.remove(&job)
    }

    fn start_job(&mut self, rows: Vec<usize>, kind: JobKind) -> Result<(u64, Vec<Out>)> {
        let job_id = self.next_job;
        self.next_job += 1;
        let mut wanted: BTreeMap<u32, BTreeSet<&AccountId>> = BTreeMap::new();
        let mut failed = BTreeMap::new();
        for &i in &rows {
            let r = self
                .rows
                .get(i)
                .ok_or_else(|| Error::invalid(format!("row {i} out of range")))?;
            for acc in [&r.sender, &r.receiver] {
                match self.directory.get(acc) {
                    Some(&c) => {
                        wanted.entry(c).or_default().insert(acc);
                    }
                    None => {
                        failed.insert(acc.clone(), format!("unknown account {acc}"));
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut pending = BTreeSet::new();
        for (client, accounts) in wanted {
            let nonce = self.next_nonce;
            self.next_nonce += 1;
            let target = account_node(client);
            let accounts: Vec<String> = accounts.into_iter().map(|a| a.0.clone()).collect();
            self.queries.insert(nonce, (job_id, target.clone(), accounts.clone()));
            pending.insert(nonce);
            let to = match self.route {
                RouteMode::ServerRouted => SERVER.to_string(),
                RouteMode::P2p => target.clone(),
            };
            out.push(Out::new(
                to,
                ProtocolMessage::EmbeddingQuery(EmbeddingQuery {
                    nonce,
                    origin: TX.into(),
                    target,
                    accounts,
                }),
            ));
        }
        self.jobs.insert(
            job_id,
            Job {
                kind,
                rows,
                pending,
                embeddings: HashMap::new(),
                failed,
            },
        );
        out.extend(self.maybe_finish(job_id)?);
        Ok((job_id, out))
    }

    pub(crate) fn handle(&mut self, from: &str, msg: ProtocolMessage) -> Result<Vec<Out>> {
        match msg {
            ProtocolMessage::KeyExchange(k) if from == SERVER => {
                self.on_shares(k)?;
                Ok(vec![])
            }
            ProtocolMessage::EmbeddingReply(r) => self.on_reply(from, r),
            ProtocolMessage::Error(e) => {
                let nonce = e
                    .nonce
                    .ok_or_else(|| Error::protocol(format!("error from {from}: {}", e.message)))?;
                self.fail_query(nonce, &e.message)
            }
            ProtocolMessage::PredictRequest(p) => {
                let mut rows = Vec::with_capacity(p.tx_ids.len());
                let mut unknown = Vec::new();
                for id in p.tx_ids {
                    match self.by_tx_id.get(&id) {
                        Some(&i) => rows.push(i),
                        None => unknown.push(RowError {
                            tx_id: id,
                            reason: "unknown transaction".into(),
                        }),
                    }
                }
                if self.classifier.is_none() {
                    return Ok(vec![Out::new(
                        from,
                        ProtocolMessage::PredictReply(PredictReply {
                            nonce: p.nonce,
                            scores: vec![],
                            errors: rows
                                .iter()
                                .map(|&i| RowError {
                                    tx_id: self.rows[i].tx_id,
                                    reason: "no trained model".into(),
                                })
                                .chain(unknown)
                                .collect(),
                        }),
                    )]);
                }
                self.pending_unknown.insert(self.next_job, unknown);
                let (_, out) = self.start_job(
                    rows,
                    JobKind::Predict {
                        requester: from.to_string(),
                        nonce: p.nonce,
                    },
                )?;
                Ok(out)
            }
            other => Err(Error::protocol(format!(
                "tx cannot handle {} from {from}",
                other.msg_type().name()
            ))),
        }
    }

    pub(crate) fn undeliverable(&mut self, to: &str, msg: ProtocolMessage, reason: &str) -> Result<Vec<Out>> {
        match msg {
            ProtocolMessage::EmbeddingQuery(q) => self.fail_query(q.nonce, &format!("{to} unreachable: {reason}")),
            other => Err(Error::protocol(format!(
                "tx could not deliver {} to {to}: {reason}",
                other.msg_type().name()
            ))),
        }
    }

    fn on_shares(&mut self, k: KeyExchange) -> Result<()> {
        for (peer, share) in &k.shares {
            if parse_account_node(peer).is_none() {
                continue;
            }
            let stat = self
                .statics
                .get(peer)
                .ok_or_else(|| Error::Crypto(format!("no static key on file for {peer}")))?;
            let key = self.identity.agree(peer, stat, &decode_share(share)?, "session")?;
            self.openers.insert(peer.clone(), Opener::new(&key));
        }
        Ok(())
    }

    fn on_reply(&mut self, from: &str, r: EmbeddingReply) -> Result<Vec<Out>> {
        let (job_id, target, accounts) = self
            .queries
            .remove(&r.nonce)
            .ok_or_else(|| Error::protocol(format!("reply {} from {from} matches no query", r.nonce)))?;
        if r.origin != target || r.target != TX {
            return Err(Error::protocol(format!(
                "reply {} came from {} (expected {target})",
                r.nonce, r.origin
            )));
        }
        let values = match r.body {
            ReplyBody::Sealed { ciphertext } => {
                let opener = self
                    .openers
                    .get_mut(&target)
                    .ok_or_else(|| Error::Crypto(format!("no session with {target}")))?;
                open_embeddings(&b64_decode(&ciphertext)?, opener, &reply_aad(r.nonce, &target))?
            }
            ReplyBody::Plain { embeddings } => {
                if self.secure {
                    return Err(Error::protocol(format!("plaintext embeddings from {target}")));
                }
                embeddings
            }
        };
        let unknown: BTreeSet<&String> = r.unknown.iter().collect();
        let known: Vec<&String> = accounts.iter().filter(|a| !unknown.contains(a)).collect();
        if values.len() != known.len() * self.latent_dim {
            return Err(Error::DimMismatch {
                expected: known.len() * self.latent_dim,
                got: values.len(),
            });
        }
        let job = self.jobs.get_mut(&job_id).expect("job of a live query");
        job.pending.remove(&r.nonce);
        for (acc, emb) in known.into_iter().zip(values.chunks_exact(self.latent_dim)) {
            job.embeddings.insert(AccountId::new(acc.as_str()), emb.to_vec());
        }
        for acc in unknown {
            job.failed
                .insert(AccountId::new(acc.as_str()), format!("{target} does not hold account {acc}"));
        }
        self.maybe_finish(job_id)
    }

    fn fail_query(&mut self, nonce: u64, reason: &str) -> Result<Vec<Out>> {
        let (job_id, _, accounts) = self
            .queries
            .remove(&nonce)
            .ok_or_else(|| Error::protocol(format!("error for unknown query {nonce}: {reason}")))?;
        let job = self.jobs.get_mut(&job_id).expect("job of a live query");
        job.pending.remove(&nonce);
        for acc in accounts {
            job.failed.insert(AccountId(acc), reason.to_string());
        }
        self.maybe_finish(job_id)
    }

    fn maybe_finish(&mut self, job_id: u64) -> Result<Vec<Out>> {
        if !self.jobs[&job_id].pending.is_empty() {
            return Ok(vec![]);
        }
        let job = self.jobs.remove(&job_id).expect("present");
        let mut matrix = Matrix::zeros(0, self.joined_dim());
        let mut kept = Vec::with_capacity(job.rows.len());
        let mut errors = Vec::new();
        let mut buf = Vec::with_capacity(self.joined_dim());
        for &i in &job.rows {
            let r = &self.rows[i];
            let why = [&r.sender, &r.receiver]
                .into_iter()
                .find_map(|a| job.failed.get(a));
            if let Some(why) = why {
                errors.push((i, why.clone()));
                continue;
            }
            buf.clear();
            buf.extend_from_slice(&job.embeddings[&r.sender]);
            buf.extend_from_slice(&job.embeddings[&r.receiver]);
            buf.extend_from_slice(&r.features);
            matrix.push_row(&buf)?;
            kept.push(i);
        }
        let joined = Joined {
            rows: kept,
            matrix,
            errors,
        };
        match job.kind {
            JobKind::Join => {
                self.finished.insert(job_id, joined);
                Ok(vec![])
            }
            JobKind::Predict { requester, nonce } => {
                let scores = self.score(&joined.matrix)?;
                let mut errors: Vec<RowError> = joined
                    .errors
                    .iter()
                    .map(|(i, why)| RowError {
                        tx_id: self.rows[*i].tx_id,
                        reason: why.clone(),
                    })
                    .collect();
                errors.extend(self.pending_unknown.remove(&job_id).unwrap_or_default());
                let scores = joined
                    .rows
                    .iter()
                    .zip(scores)
                    .map(|(&i, score)| ScoredRow {
                        tx_id: self.rows[i].tx_id,
                        score,
                    })
                    .collect();
                Ok(vec![Out::new(
                    requester,
                    ProtocolMessage::PredictReply(PredictReply { nonce, scores, errors }),
                )])
            }
        }
    }

    /// Normalises with the stored training statistics (no noise) and scores.
    pub(crate) fn score(&self, joined: &Matrix) -> Result<Vec<f64>> {
        let (model, stats) = match (&self.classifier, &self.stats) {
            (Some(m), Some(s)) => (m, s),
            _ => return Err(Error::protocol("transaction client has no trained model")),
        };
        if joined.is_empty() {
            return Ok(vec![]);
        }
        model.predict_batch(&stats.apply(joined)?)
    }

    /// Runs the phase-3 recipe on a joined training matrix and keeps the
    /// model for inference.
    pub(crate) fn train(&mut self, joined: &Matrix, labels: &[u8], plan: &TrainPlan) -> Result<LocalFit> {
        let fit = fit_transaction_model(joined, labels, plan, self.latent_dim)?;
        self.classifier = Some(fit.classifier.clone());
        self.stats = Some(fit.stats.clone());
        Ok(fit)
    }
}

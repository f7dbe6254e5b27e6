use std::collections::{BTreeMap, HashMap};

use super::{account_node, parse_account_node, Out, RoundSchedule, SERVER, TX};
use crate::data::{AccountId, AccountShard, FLAG_ENCODING_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{AeTrainer, Autoencoder, TrainSpec};
use crate::privacy::{mask_update, seal_embeddings, Identity, KeyMaterial, PublicShare, Sealer};
use crate::transport::{
    b64_decode, b64_encode, encode_u64s, EmbeddingQuery, EmbeddingReply, KeyExchange, ModelUpdate,
    ProtocolMessage, Register, ReplyBody, UpdateBody,
};

pub(crate) fn decode_share(s: &str) -> Result<PublicShare> {
    b64_decode(s)?
        .try_into()
        .map_err(|_| Error::Crypto("key share is not 32 bytes".into()))
}

/// Associated data binding a sealed reply to its query.
pub(crate) fn reply_aad(nonce: u64, origin: &str) -> Vec<u8> {
    let mut aad = nonce.to_be_bytes().to_vec();
    aad.extend_from_slice(origin.as_bytes());
    aad
}

/// An account client: holds a shard of account records, trains the shared
/// autoencoder locally and answers embedding queries.
pub struct AccountClient {
    id: u32,
    name: String,
    encoded: Matrix,
    index: HashMap<AccountId, usize>,
    model: Autoencoder,
    trainer: AeTrainer,
    schedule: RoundSchedule,
    secure: bool,
    weighted: bool,
    identity: Identity,
    statics: BTreeMap<String, PublicShare>,
    keys: Option<KeyMaterial>,
    sealer: Option<Sealer>,
    ready: bool,
    epochs_trained: usize,
}

impl std::fmt::Debug for AccountClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AccountClient")
            .field("name", &self.name)
            .field("accounts", &self.index.len())
            .field("ready", &self.ready)
            .finish()
    }
}

impl AccountClient {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        shard: &AccountShard,
        init: Autoencoder,
        spec: TrainSpec,
        schedule: RoundSchedule,
        secure: bool,
        weighted: bool,
        identity: Identity,
        statics: BTreeMap<String, PublicShare>,
    ) -> Result<Self> {
        if shard.records.is_empty() {
            return Err(Error::invalid(format!("client {} has an empty shard", shard.client_id)));
        }
        let mut encoded = Matrix::zeros(0, FLAG_ENCODING_DIM);
        let mut index = HashMap::with_capacity(shard.records.len());
        for (i, r) in shard.records.iter().enumerate() {
            encoded.push_row(&r.flag.encode())?;
            index.insert(r.account_id.clone(), i);
        }
        Ok(AccountClient {
            id: shard.client_id,
            name: account_node(shard.client_id),
            encoded,
            index,
            model: init,
            trainer: AeTrainer::new(spec)?,
            schedule,
            secure,
            weighted,
            identity,
            statics,
            keys: None,
            sealer: None,
            ready: false,
            epochs_trained: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn client_id(&self) -> u32 {
        self.id
    }

    /// Whether the final global model is installed.
    pub fn ready(&self) -> bool {
        self.ready
    }

    pub fn model(&self) -> &Autoencoder {
        &self.model
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn n_accounts(&self) -> usize {
        self.index.len()
    }

    pub(crate) fn hello(&self) -> Vec<Out> {
        let mut out = vec![Out::new(
            SERVER,
            ProtocolMessage::Register(Register {
                node: self.name.clone(),
                client_id: Some(self.id),
            }),
        )];
        if self.secure {
            out.push(Out::new(
                SERVER,
                ProtocolMessage::KeyExchange(KeyExchange {
                    shares: [(self.name.clone(), b64_encode(&self.identity.ephemeral_public()))].into(),
                }),
            ));
        }
        out
    }

    pub(crate) fn handle(&mut self, from: &str, msg: ProtocolMessage) -> Result<Vec<Out>> {
        match msg {
            ProtocolMessage::KeyExchange(k) if from == SERVER => {
                self.on_shares(k)?;
                Ok(vec![])
            }
            ProtocolMessage::GlobalModel(g) if from == SERVER => {
                self.model.load_flat(&g.params)?;
                if g.last {
                    self.ready = true;
                    return Ok(vec![]);
                }
                self.ready = false;
                let update = self.local_round(g.round)?;
                Ok(vec![Out::new(SERVER, ProtocolMessage::ModelUpdate(update))])
            }
            ProtocolMessage::EmbeddingQuery(q) => Ok(vec![Out::new(from, self.answer(q)?)]),
            other => Err(Error::protocol(format!(
                "{} cannot handle {} from {from}",
                self.name,
                other.msg_type().name()
            ))),
        }
    }

    fn on_shares(&mut self, k: KeyExchange) -> Result<()> {
        let mut keys = KeyMaterial::default();
        for (peer, share) in &k.shares {
            if *peer == self.name {
                continue;
            }
            let eph = decode_share(share)?;
            let stat = self
                .statics
                .get(peer)
                .ok_or_else(|| Error::Crypto(format!("no static key on file for {peer}")))?;
            if let Some(pid) = parse_account_node(peer) {
                keys.insert_mask_peer(pid, self.identity.agree(peer, stat, &eph, "mask")?);
            } else if peer == TX {
                let key = self.identity.agree(peer, stat, &eph, "session")?;
                self.sealer = Some(Sealer::new(&key, &self.name));
                keys.insert_session(peer.clone(), key);
            }
        }
        self.keys = Some(keys);
        Ok(())
    }

    fn local_round(&mut self, round: u64) -> Result<ModelUpdate> {
        self.trainer.train(&mut self.model, &self.encoded, self.schedule.interval)?;
        self.epochs_trained += self.schedule.interval;
        let mut params = self.model.flatten();
        if self.weighted {
            let n = self.index.len() as f64;
            params.iter_mut().for_each(|p| *p *= n);
            params.push(n);
        }
        let body = if self.secure {
            let keys = self
                .keys
                .as_ref()
                .ok_or_else(|| Error::protocol(format!("{} has no mask keys", self.name)))?;
            let masked = mask_update(&params, self.id, keys, round)?;
            UpdateBody::Masked {
                values: encode_u64s(&masked.values),
            }
        } else {
            UpdateBody::Plain { params }
        };
        Ok(ModelUpdate {
            client_id: self.id,
            round,
            body,
        })
    }

    fn answer(&mut self, q: EmbeddingQuery) -> Result<ProtocolMessage> {
        if q.target != self.name {
            return Err(Error::protocol(format!("{} got a query for {}", self.name, q.target)));
        }
        if !self.ready {
            return Err(Error::protocol(format!("{} queried before training finished", self.name)));
        }
        let mut values = Vec::with_capacity(q.accounts.len() * self.model.latent_dim());
        let mut unknown = Vec::new();
        for acc in &q.accounts {
            match self.index.get(&AccountId::new(acc.as_str())) {
                Some(&i) => values.extend(self.model.encode(self.encoded.row(i))?),
                None => unknown.push(acc.clone()),
            }
        }
        let body = if self.secure {
            let sealer = self
                .sealer
                .as_mut()
                .ok_or_else(|| Error::protocol(format!("{} has no session key", self.name)))?;
            let ct = seal_embeddings(&values, sealer, &reply_aad(q.nonce, &self.name))?;
            ReplyBody::Sealed {
                ciphertext: b64_encode(&ct),
            }
        } else {
            ReplyBody::Plain { embeddings: values }
        };
        Ok(ProtocolMessage::EmbeddingReply(EmbeddingReply {
            nonce: q.nonce,
            origin: self.name.clone(),
            target: q.origin,
            body,
            unknown,
        }))
    }
}

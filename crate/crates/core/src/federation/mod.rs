//! The protocol: server, account-client and transaction-client state
//! machines, and an orchestrator that drives them over a transport.

mod account;
mod isolation;
mod orchestrator;
mod server;
mod tx;

use serde::{Deserialize, Serialize};

pub use account::AccountClient;
pub use isolation::{
    scan_isolation, IsolationReport, SensitiveValues, Violation, EMBEDDING_TO_SERVER, FEATURES_TO_SERVER, MODEL_TO_TX,
    RAW_FLAG,
};
pub use orchestrator::{Federation, JoinOutcome, PredictOutcome};
pub use server::Server;
pub use tx::TxClient;


use crate::data::{rebalance_with, Sampling, TX_FEATURES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{classifier_train, AeConfig, Classifier, ClassifierConfig, TrainSpec};
use crate::privacy::{add_gaussian_noise, normalize_standard, NoiseSpec, NormStats};
use crate::seed;
use crate::transport::{ProtocolMessage, RouteMode};

pub const SERVER: &str = "server";
pub const TX: &str = "tx";
pub const DRIVER: &str = "driver";

pub fn account_node(client_id: u32) -> String {
    format!("ac:{client_id}")
}

pub(crate) fn parse_account_node(name: &str) -> Option<u32> {
    name.strip_prefix("ac:")?.parse().ok()
}

/// Elementwise mean of equal-length vectors. Each coordinate is summed in
/// sorted order, so the result does not depend on the order of `updates`.
pub fn aggregate(updates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::invalid("no updates to aggregate"))?;
    let dim = first.len();
    if let Some(bad) = updates.iter().find(|u| u.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if updates.len() == 1 {
        return Ok(first.clone());
    }
    let m = updates.len() as f64;
    let mut column = vec![0.0; updates.len()];
    Ok((0..dim)
        .map(|j| {
            for (c, u) in column.iter_mut().zip(updates) {
                *c = u[j];
            }
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / m
        })
        .collect())
}

/// `interval` local epochs per round, `rounds` aggregation rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub interval: usize,
    pub rounds: usize,
}

impl Default for RoundSchedule {
    fn default() -> Self {
        RoundSchedule {
            interval: 50,
            rounds: 1,
        }
    }
}

impl RoundSchedule {
    pub fn new(interval: usize, rounds: usize) -> Result<Self> {
        let s = RoundSchedule { interval, rounds };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 || self.rounds == 0 {
            return Err(Error::config("interval and rounds must both be >= 1"));
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.interval * self.rounds
    }

    pub fn label(&self) -> String {
        format!("I{}-R{}", self.interval, self.rounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    /// Masked aggregation, authenticated key exchange and sealed embeddings.
    pub secure: bool,
    pub route: RouteMode,
    /// Weight client updates by shard size instead of a plain mean.
    pub weighted: bool,
    pub schedule: RoundSchedule,
    pub autoencoder: AeConfig,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            secure: true,
            route: RouteMode::ServerRouted,
            weighted: false,
            schedule: RoundSchedule::default(),
            autoencoder: AeConfig::default(),
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.autoencoder.train.validate()
    }

    /// Local training settings of account client `client_id`. A centralised
    /// run that wants to match a one-client federation uses client 1's spec.
    pub fn client_train_spec(&self, client_id: u32) -> TrainSpec {
        TrainSpec {
            seed: seed::derive_n(self.seed, "ac-train", u64::from(client_id)),
            ..self.autoencoder.train.clone()
        }
    }

    pub fn init_seed(&self) -> u64 {
        seed::derive(self.seed, "ae-init")
    }
}

/// What the transaction client does with a joined training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub classifier: ClassifierConfig,
    pub noise: NoiseSpec,
    pub sampling: Sampling,
    pub sampling_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub classifier: Classifier,
    pub stats: NormStats,
    /// Standardised training rows before noise.
    pub clean: Matrix,
    /// The same rows after noise, before any resampling.
    pub noisy: Matrix,
}

/// Standardise, perturb, rebalance, fit. Shared by the transaction client
/// and the centralised baseline so the two cannot drift apart. SMOTE
/// measures distance on the transaction features only.
pub fn fit_transaction_model(joined: &Matrix, labels: &[u8], plan: &TrainPlan, latent_dim: usize) -> Result<LocalFit> {
    let (clean, stats) = normalize_standard(joined)?;
    let noisy = add_gaussian_noise(&clean, &plan.noise)?;
    let classifier = if plan.sampling == Sampling::None {
        classifier_train(&noisy, labels, None, &plan.classifier)?
    } else {
        let start = (2 * latent_dim).min(noisy.cols());
        let end = (start + TX_FEATURES).min(noisy.cols());
        let rb = rebalance_with(&noisy, labels, plan.sampling, start..end, plan.sampling_seed)?;
        classifier_train(&rb.rows, &rb.labels, Some(&rb.weights), &plan.classifier)?
    };
    Ok(LocalFit {
        classifier,
        stats,
        clean,
        noisy,
    })
}

/// A message a node wants sent.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Out {
    pub to: String,
    pub msg: ProtocolMessage,
}

impl Out {
    pub fn new(to: impl Into<String>, msg: ProtocolMessage) -> Self {
        Out { to: to.into(), msg }
    }
}

//! Vertically split transaction/account records, the synthetic generator,
//! account sharding and class rebalancing.

mod csv_io;
mod generate;
mod rebalance;
mod shard;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use csv_io::{read_dataset, write_dataset};
pub use generate::{generate, GenConfig};
pub use rebalance::{rebalance, rebalance_with, Rebalanced, Sampling, SMOTE_K};
pub use shard::{shard_accounts, AccountShard};

/// Number of transaction-side features.
pub const TX_FEATURES: usize = 7;
/// Largest account status code.
pub const MAX_FLAG: u8 = 11;
/// Flags at or above this value mark high-risk accounts.
pub const HIGH_RISK_FLAG: u8 = 8;
/// Width of the model-input encoding of a flag: scaled value plus one-hot.
pub const FLAG_ENCODING_DIM: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Account status code in `0..=11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Flag(u8);

impl Flag {
    pub fn new(v: u8) -> Result<Self> {
        if v > MAX_FLAG {
            return Err(Error::invalid(format!("flag {v} outside 0..={MAX_FLAG}")));
        }
        Ok(Flag(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_high_risk(self) -> bool {
        self.0 >= HIGH_RISK_FLAG
    }

    /// `[flag / 11, one_hot(flag; 12)]`.
    pub fn encode(self) -> [f64; FLAG_ENCODING_DIM] {
        let mut out = [0.0; FLAG_ENCODING_DIM];
        out[0] = f64::from(self.0) / f64::from(MAX_FLAG);
        out[1 + self.0 as usize] = 1.0;
        out
    }
}

impl TryFrom<u8> for Flag {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Flag::new(v)
    }
}

impl From<Flag> for u8 {
    fn from(f: Flag) -> u8 {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_id: u64,
    pub features: [f64; TX_FEATURES],
    pub sender: AccountId,
    pub receiver: AccountId,
    pub label: u8,
}

impl TransactionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.sender == self.receiver {
            return Err(Error::invalid(format!(
                "transaction {} has sender == receiver",
                self.tx_id
            )));
        }
        if self.label > 1 {
            return Err(Error::invalid(format!(
                "transaction {} has label {}",
                self.tx_id, self.label
            )));
        }
        if !self.features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("transaction features"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub account_id: AccountId,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub transactions: Vec<TransactionRecord>,
    pub accounts: BTreeMap<AccountId, AccountRecord>,
    /// Indices into `transactions`.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    /// Checks referential integrity and split disjointness.
    pub fn validate(&self) -> Result<()> {
        for tx in &self.transactions {
            tx.validate()?;
            for acc in [&tx.sender, &tx.receiver] {
                if !self.accounts.contains_key(acc) {
                    return Err(Error::UnknownAccount(acc.to_string()));
                }
            }
        }
        let mut seen = vec![false; self.transactions.len()];
        for &i in self.train.iter().chain(&self.test) {
            if i >= seen.len() {
                return Err(Error::invalid(format!("split index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::invalid(format!("row {i} appears twice in split")));
            }
            seen[i] = true;
        }
        Ok(())
    }

    /// Transaction features of the selected rows.
    pub fn tx_features(&self, idx: &[usize]) -> Matrix {
        let rows: Vec<&[f64]> = idx
            .iter()
            .map(|&i| &self.transactions[i].features[..])
            .collect();
        Matrix::from_rows(&rows).expect("fixed-width rows")
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<u8> {
        idx.iter().map(|&i| self.transactions[i].label).collect()
    }

    pub fn flag_of(&self, id: &AccountId) -> Option<Flag> {
        self.accounts.get(id).map(|a| a.flag)
    }

    /// Stratified subsample of the train split keeping `fraction` of each class.
    pub fn subsample_train(&mut self, fraction: f64, seed: u64) -> Result<()> {
        let labels = self.labels(&self.train);
        let keep = stratified_subset(&labels, fraction, seed)?;
        self.train = keep.into_iter().map(|k| self.train[k]).collect();
        Ok(())
    }
}

/// Positions (ascending) of a class-stratified random subset keeping
/// `round(fraction * n_c)` rows of each class, at least one per class present.
pub fn stratified_subset(labels: &[u8], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("data fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok((0..labels.len()).collect());
    }
    use rand::seq::SliceRandom;
    let mut rng = crate::seed::rng(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == 1);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let keep = |n: usize| ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
    pos.truncate(keep(pos.len()));
    neg.truncate(keep(neg.len()));
    let mut out: Vec<usize> = pos.into_iter().chain(neg).collect();
    out.sort_unstable();
    Ok(out)
}

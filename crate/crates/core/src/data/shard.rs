use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AccountRecord, Dataset};
use crate::error::{Error, Result};
use crate::seed;

/// The accounts held by one account client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountShard {
    /// 1-based client index.
    pub client_id: u32,
    pub records: Vec<AccountRecord>,
}

/// Randomly partitions the dataset's accounts over `m` clients; shard sizes
/// differ by at most one. Records within a shard are ordered by account id.
pub fn shard_accounts(dataset: &Dataset, m: usize, seed: u64) -> Result<Vec<AccountShard>> {
    let n = dataset.accounts.len();
    if m == 0 || m > n {
        return Err(Error::config(format!(
            "cannot split {n} accounts over {m} clients"
        )));
    }
    let mut records: Vec<AccountRecord> = dataset.accounts.values().cloned().collect();
    records.shuffle(&mut seed::rng(seed::derive(seed, "shard")));

    let base = n / m;
    let extra = n % m;
    let mut shards = Vec::with_capacity(m);
    let mut it = records.into_iter();
    for k in 0..m {
        let size = base + usize::from(k < extra);
        let mut records: Vec<AccountRecord> = it.by_ref().take(size).collect();
        records.sort_by(|a, b| a.account_id.cmp(&b.account_id));
        shards.push(AccountShard {
            client_id: k as u32 + 1,
            records,
        });
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::data::{generate, GenConfig};

    fn dataset(n_accounts: usize) -> Dataset {
        generate(&GenConfig {
            n_train: 50,
            n_accounts,
            seed: 5,
            ..GenConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn single_shard_is_everything() {
        let ds = dataset(40);
        let shards = shard_accounts(&ds, 1, 0).unwrap();
        assert_eq!(shards.len(), 1);
        let got: BTreeSet<_> = shards[0].records.iter().map(|r| &r.account_id).collect();
        let want: BTreeSet<_> = ds.accounts.keys().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn even_split() {
        let ds = dataset(1000);
        let shards = shard_accounts(&ds, 10, 3).unwrap();
        assert!(shards.iter().all(|s| s.records.len() == 100));
    }

    #[test]
    fn uneven_split_covers_disjointly() {
        let ds = dataset(10);
        let shards = shard_accounts(&ds, 3, 9).unwrap();
        let mut sizes: Vec<_> = shards.iter().map(|s| s.records.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        let mut all = BTreeSet::new();
        for s in &shards {
            for r in &s.records {
                assert!(all.insert(r.account_id.clone()), "duplicate {}", r.account_id);
            }
        }
        assert_eq!(all.len(), 10);
        assert_eq!(shard_accounts(&ds, 3, 9).unwrap(), shards);
    }

    #[test]
    fn too_many_clients() {
        let ds = dataset(10);
        assert!(shard_accounts(&ds, 11, 0).is_err());
        assert!(shard_accounts(&ds, 0, 0).is_err());
    }
}

//! `transactions.csv`, `accounts.csv` and `split.csv` import/export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AccountId, AccountRecord, Dataset, Flag, TransactionRecord};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct TxRow {
    tx_id: u64,
    f1: f64,
    f2: f64,
    f3: f64,
    f4: f64,
    f5: f64,
    f6: f64,
    f7: f64,
    sender: String,
    receiver: String,
    label: u8,
}

#[derive(Serialize, Deserialize)]
struct AccountRow {
    account_id: String,
    flag: u8,
}

#[derive(Serialize, Deserialize)]
struct SplitRow {
    tx_id: u64,
    split: String,
}

pub(crate) fn write_transactions<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for t in &ds.transactions {
        let f = t.features;
        wr.serialize(TxRow {
            tx_id: t.tx_id,
            f1: f[0],
            f2: f[1],
            f3: f[2],
            f4: f[3],
            f5: f[4],
            f6: f[5],
            f7: f[6],
            sender: t.sender.0.clone(),
            receiver: t.receiver.0.clone(),
            label: t.label,
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub(crate) fn write_accounts<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for a in ds.accounts.values() {
        wr.serialize(AccountRow {
            account_id: a.account_id.0.clone(),
            flag: a.flag.value(),
        })?;
    }
    wr.flush()?;
    Ok(())
}

fn write_split<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (name, idx) in [("train", &ds.train), ("test", &ds.test)] {
        for &i in idx {
            wr.serialize(SplitRow {
                tx_id: ds.transactions[i].tx_id,
                split: name.to_string(),
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Writes `transactions.csv`, `accounts.csv` and `split.csv` into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_transactions(ds, File::create(dir.join("transactions.csv"))?)?;
    write_accounts(ds, File::create(dir.join("accounts.csv"))?)?;
    write_split(ds, File::create(dir.join("split.csv"))?)?;
    Ok(())
}

pub(crate) fn read_transactions<R: Read>(r: R) -> Result<Vec<TransactionRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let r: TxRow = row?;
        let t = TransactionRecord {
            tx_id: r.tx_id,
            features: [r.f1, r.f2, r.f3, r.f4, r.f5, r.f6, r.f7],
            sender: AccountId(r.sender),
            receiver: AccountId(r.receiver),
            label: r.label,
        };
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

pub(crate) fn read_accounts<R: Read>(r: R) -> Result<BTreeMap<AccountId, AccountRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = BTreeMap::new();
    for row in rd.deserialize() {
        let r: AccountRow = row?;
        let id = AccountId(r.account_id);
        let rec = AccountRecord {
            account_id: id.clone(),
            flag: Flag::new(r.flag)?,
        };
        if out.insert(id.clone(), rec).is_some() {
            return Err(Error::invalid(format!("duplicate account {id}")));
        }
    }
    Ok(out)
}

/// Reads a dataset written by [`write_dataset`]. Without `split.csv` the
/// first four fifths of the rows form the train split.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let transactions = read_transactions(File::open(dir.join("transactions.csv"))?)?;
    let accounts = read_accounts(File::open(dir.join("accounts.csv"))?)?;
    let split_path = dir.join("split.csv");
    let (train, test) = if split_path.exists() {
        let pos: BTreeMap<u64, usize> = transactions
            .iter()
            .enumerate()
            .map(|(i, t)| (t.tx_id, i))
            .collect();
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut rd = csv::Reader::from_reader(File::open(split_path)?);
        for row in rd.deserialize() {
            let r: SplitRow = row?;
            let i = *pos
                .get(&r.tx_id)
                .ok_or_else(|| Error::invalid(format!("split names unknown tx {}", r.tx_id)))?;
            match r.split.as_str() {
                "train" => train.push(i),
                "test" => test.push(i),
                other => return Err(Error::invalid(format!("unknown split {other:?}"))),
            }
        }
        (train, test)
    } else {
        let n = transactions.len();
        let cut = n - n / 5;
        ((0..cut).collect(), (cut..n).collect())
    };
    let ds = Dataset {
        transactions,
        accounts,
        train,
        test,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GenConfig};

    #[test]
    fn round_trip_through_files() {
        let ds = generate(&GenConfig {
            n_train: 300,
            n_accounts: 50,
            seed: 2,
            ..GenConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);

        let header = std::fs::read_to_string(dir.path().join("transactions.csv")).unwrap();
        assert!(header.starts_with("tx_id,f1,f2,f3,f4,f5,f6,f7,sender,receiver,label\n"));
        let acc = std::fs::read_to_string(dir.path().join("accounts.csv")).unwrap();
        assert!(acc.starts_with("account_id,flag\n"));
    }

    #[test]
    fn rejects_out_of_range_flag() {
        let bad = "account_id,flag\nA,12\n";
        assert!(read_accounts(bad.as_bytes()).is_err());
    }
}

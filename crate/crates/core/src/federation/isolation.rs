//! Transcript audit for the role-isolation rules: account clients never send
//! raw flags, the transaction client never receives model parameters, and the
//! server never receives embeddings or transaction features in the clear.

use std::collections::HashSet;

use serde::Serialize;
use serde_json::Value;

use super::{parse_account_node, SERVER, TX};
use crate::data::{Flag, MAX_FLAG};
use crate::error::Result;
use crate::transport::{MsgType, Transcript};

/// Ground truth the auditor compares payloads against.
#[derive(Debug, Clone, Default)]
pub struct SensitiveValues {
    /// Flattened autoencoder parameters (any round).
    pub model_params: Vec<Vec<f64>>,
    pub embeddings: Vec<Vec<f64>>,
    pub tx_features: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub seq: u64,
    pub from: String,
    pub to: String,
    pub rule: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IsolationReport {
    pub frames_scanned: usize,
    pub violations: Vec<Violation>,
}

impl IsolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: &str) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

pub const RAW_FLAG: &str = "raw-flag-from-account-client";
pub const MODEL_TO_TX: &str = "model-parameters-to-tx";
pub const EMBEDDING_TO_SERVER: &str = "embedding-to-server";
pub const FEATURES_TO_SERVER: &str = "tx-features-to-server";

/// Exact-match index over every length-`w` window of some reference vectors.
struct Windows {
    w: usize,
    set: HashSet<Vec<u64>>,
}

impl Windows {
    fn new(w: usize, refs: &[Vec<f64>]) -> Self {
        let mut set = HashSet::new();
        if w > 0 {
            for r in refs {
                for win in r.windows(w) {
                    set.insert(win.iter().map(|x| x.to_bits()).collect());
                }
            }
        }
        Windows { w, set }
    }

    fn hit(&self, xs: &[f64]) -> bool {
        if self.w == 0 || self.set.is_empty() {
            return false;
        }
        xs.windows(self.w)
            .any(|win| self.set.contains(&win.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
    }
}

fn walk<'a>(v: &'a Value, keys: &mut Vec<&'a str>, arrays: &mut Vec<Vec<f64>>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                keys.push(k);
                walk(x, keys, arrays);
            }
        }
        Value::Array(xs) => {
            if !xs.is_empty() && xs.iter().all(Value::is_number) {
                arrays.push(xs.iter().filter_map(Value::as_f64).collect());
            } else {
                for x in xs {
                    walk(x, keys, arrays);
                }
            }
        }
        _ => {}
    }
}

pub fn scan_isolation(transcript: &Transcript, sensitive: &SensitiveValues) -> Result<IsolationReport> {
    let flags: Vec<Vec<f64>> = (0..=MAX_FLAG)
        .map(|f| Flag::new(f).expect("in range").encode().to_vec())
        .collect();
    let flag_windows = Windows::new(flags[0].len(), &flags);
    // Eight consecutive parameters are far beyond coincidence.
    let param_windows = Windows::new(8, &sensitive.model_params);
    let emb_w = sensitive.embeddings.first().map_or(0, Vec::len);
    let emb_windows = Windows::new(emb_w, &sensitive.embeddings);
    let feat_w = sensitive.tx_features.first().map_or(0, Vec::len);
    let feat_windows = Windows::new(feat_w, &sensitive.tx_features);

    let mut report = IsolationReport::default();
    for e in transcript.entries() {
        report.frames_scanned += 1;
        let value: Value = serde_json::from_slice(&e.frame.payload)?;
        let mut keys = Vec::new();
        let mut arrays = Vec::new();
        walk(&value, &mut keys, &mut arrays);
        let mut flag = |rule: &'static str, detail: String| {
            report.violations.push(Violation {
                seq: e.seq,
                from: e.from.clone(),
                to: e.to.clone(),
                rule,
                detail,
            });
        };

        if parse_account_node(&e.from).is_some() {
            if keys.iter().any(|k| k.eq_ignore_ascii_case("flag") || k.eq_ignore_ascii_case("flags")) {
                flag(RAW_FLAG, "payload has a flag field".into());
            } else if arrays.iter().any(|a| flag_windows.hit(a)) {
                flag(RAW_FLAG, "payload contains a flag encoding".into());
            }
        }
        if e.to == TX {
            let t = e.msg_type();
            if matches!(t, MsgType::ModelUpdate | MsgType::GlobalModel) {
                flag(MODEL_TO_TX, format!("{} delivered to tx", t.name()));
            } else if arrays.iter().any(|a| param_windows.hit(a)) {
                flag(MODEL_TO_TX, "payload contains model parameters".into());
            }
        }
        if e.to == SERVER {
            let plain_reply = e.msg_type() == MsgType::EmbeddingReply && keys.contains(&"embeddings");
            if plain_reply || arrays.iter().any(|a| emb_windows.hit(a)) {
                flag(EMBEDDING_TO_SERVER, "plaintext embeddings".into());
            }
            if arrays.iter().any(|a| feat_windows.hit(a)) {
                flag(FEATURES_TO_SERVER, "transaction feature row".into());
            }
        }
    }
    Ok(report)
}

//! Red-team attacks against the protocol's three exposure points: model
//! updates (gradient inversion), the trained classifier (membership and
//! attribute inference) and shared embeddings (feature leakage).

mod adam;
mod attribute;
mod inversion;
mod leakage;
mod membership;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use attribute::{attribute_inference, AttributeBudget, Completion};
pub use inversion::{gradient_inversion, observed_gradient, InversionProblem, InversionResult, ParamScope};
pub use leakage::{feature_leakage_probe, LeakageSpec};
pub use membership::{membership_inference, LabeledRows, MembershipSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Inversion,
    Membership,
    Attribute,
    Leakage,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Inversion,
        AttackKind::Membership,
        AttackKind::Attribute,
        AttackKind::Leakage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Inversion => "inversion",
            AttackKind::Membership => "membership",
            AttackKind::Attribute => "attribute",
            AttackKind::Leakage => "leakage",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown attack {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub metrics: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl AttackReport {
    pub(crate) fn new(attack: AttackKind, config: impl Serialize, seed: u64) -> Self {
        AttackReport {
            attack,
            metrics: BTreeMap::new(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Checks every cosine lies in `[-1, 1]` and every AUC or accuracy in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.metrics {
            let ok = if k.contains("cos") {
                (-1.0..=1.0).contains(&v)
            } else if k.contains("auc") || k.contains("accuracy") || k.contains("chance") {
                (0.0..=1.0).contains(&v)
            } else {
                v.is_finite()
            };
            if !ok {
                return Err(Error::invalid(format!("metric {k} = {v} out of range")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

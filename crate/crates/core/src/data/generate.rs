use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{AccountId, AccountRecord, Dataset, Flag, TransactionRecord, MAX_FLAG, TX_FEATURES};
use crate::error::{Error, Result};
use crate::seed;

/// Parameters of the synthetic payment-network generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_train: usize,
    pub positive_rate: f64,
    pub n_accounts: usize,
    /// Probability that a crime transaction touches a high-risk (flag >= 8) account
    /// beyond what uniform account choice would give.
    pub flag_crime_correlation: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_train: 100_000,
            positive_rate: 0.01,
            n_accounts: 20_000,
            flag_crime_correlation: 0.6,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 1 {
            return Err(Error::config("n_train must be >= 1"));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::config("positive_rate must lie in (0, 1)"));
        }
        if self.n_accounts < 2 {
            return Err(Error::config(
                "n_accounts must be >= 2 so that sender != receiver",
            ));
        }
        if !(0.0..=1.0).contains(&self.flag_crime_correlation) {
            return Err(Error::config("flag_crime_correlation must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn n_test(&self) -> usize {
        self.n_train.div_ceil(4)
    }
}

const CURRENCY_AVG: [f64; 8] = [45.0, 120.0, 310.0, 850.0, 1600.0, 4200.0, 9500.0, 21000.0];

// Relative frequency of each flag value; 8..=11 form the high-risk pool.
const FLAG_WEIGHTS: [f64; 12] = [
    0.55, 0.06, 0.05, 0.05, 0.05, 0.05, 0.045, 0.045, 0.03, 0.025, 0.025, 0.02,
];

#[derive(Clone, Copy)]
enum Profile {
    Benign,
    Structuring,
    Burst,
    Mule,
}

struct FeatureSampler {
    ratio: LogNormal<f64>,
    burst_ratio: LogNormal<f64>,
    freq: LogNormal<f64>,
    hot_freq: LogNormal<f64>,
    mule_freq: LogNormal<f64>,
    day_hour: Normal<f64>,
    night_hour: Normal<f64>,
    gap: Exp<f64>,
    short_gap: Exp<f64>,
    noise: Normal<f64>,
}

impl FeatureSampler {
    fn new() -> Self {
        FeatureSampler {
            ratio: LogNormal::new(0.0, 0.55).unwrap(),
            burst_ratio: LogNormal::new(7f64.ln(), 0.45).unwrap(),
            freq: LogNormal::new(8f64.ln(), 0.6).unwrap(),
            hot_freq: LogNormal::new(22f64.ln(), 0.5).unwrap(),
            mule_freq: LogNormal::new(14f64.ln(), 0.5).unwrap(),
            day_hour: Normal::new(13.5, 3.2).unwrap(),
            night_hour: Normal::new(2.5, 1.5).unwrap(),
            gap: Exp::new(1.0 / 15.0).unwrap(),
            short_gap: Exp::new(1.0 / 2.0).unwrap(),
            noise: Normal::new(0.0, 1.0).unwrap(),
        }
    }

    fn hops(rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if u < 0.6 {
            1.0
        } else if u < 0.9 {
            2.0
        } else if u < 0.98 {
            3.0
        } else {
            4.0
        }
    }

    /// `[amount, frequency, currency average, hour, days since last, hops, aux]`.
    fn sample(&self, profile: Profile, rng: &mut ChaCha8Rng) -> [f64; TX_FEATURES] {
        let cur = CURRENCY_AVG[rng.random_range(0..CURRENCY_AVG.len())];
        let mut ratio = self.ratio.sample(rng);
        let mut freq = self.freq.sample(rng);
        let mut hour = self.day_hour.sample(rng);
        let mut gap = self.gap.sample(rng);
        let mut hops = Self::hops(rng);
        match profile {
            Profile::Benign => {}
            Profile::Structuring => {
                ratio = rng.random_range(2.6..2.98);
                freq = self.hot_freq.sample(rng);
            }
            Profile::Burst => {
                ratio = self.burst_ratio.sample(rng);
                hour = self.night_hour.sample(rng);
                gap = self.short_gap.sample(rng);
            }
            Profile::Mule => {
                hops = f64::from(rng.random_range(3u8..=5));
                freq = self.mule_freq.sample(rng);
            }
        }
        [
            cur * ratio,
            freq,
            cur,
            hour.rem_euclid(24.0),
            gap,
            hops,
            self.noise.sample(rng),
        ]
    }
}

fn crime_profile(rng: &mut ChaCha8Rng) -> Profile {
    let u: f64 = rng.random();
    if u < 0.35 {
        Profile::Structuring
    } else if u < 0.70 {
        Profile::Burst
    } else {
        Profile::Mule
    }
}

fn class_counts(n: usize, rate: f64) -> usize {
    if n < 2 {
        return usize::from(rate >= 0.5);
    }
    ((n as f64 * rate).round() as usize).clamp(1, n - 1)
}

fn sample_flag(rng: &mut ChaCha8Rng) -> u8 {
    let total: f64 = FLAG_WEIGHTS.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (v, w) in FLAG_WEIGHTS.iter().enumerate() {
        if u < *w {
            return v as u8;
        }
        u -= w;
    }
    MAX_FLAG
}

/// Generates a synthetic dataset. The train split holds `n_train` rows and the
/// test split `ceil(n_train / 4)`; each split gets exactly
/// `round(positive_rate * n)` positives.
pub fn generate(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(config.seed, "generate"));
    let sampler = FeatureSampler::new();

    let ids: Vec<AccountId> = (0..config.n_accounts)
        .map(|i| AccountId(format!("AC{i:06}")))
        .collect();
    let flags: Vec<u8> = (0..config.n_accounts)
        .map(|_| sample_flag(&mut rng))
        .collect();
    let high_pool: Vec<usize> = (0..config.n_accounts)
        .filter(|&i| flags[i] >= super::HIGH_RISK_FLAG)
        .collect();

    let n_train = config.n_train;
    let n_test = config.n_test();
    let mut labels = Vec::with_capacity(n_train + n_test);
    for n in [n_train, n_test] {
        let pos = class_counts(n, config.positive_rate);
        let mut block: Vec<u8> = (0..n).map(|i| u8::from(i < pos)).collect();
        block.shuffle(&mut rng);
        labels.extend(block);
    }

    let n_acc = config.n_accounts;
    let mut transactions = Vec::with_capacity(labels.len());
    for (tx_id, &label) in labels.iter().enumerate() {
        let profile = if label == 1 {
            crime_profile(&mut rng)
        } else if rng.random_bool(0.06) {
            // benign transactions that share one trait with a crime typology
            crime_profile(&mut rng)
        } else {
            Profile::Benign
        };
        let mut features = sampler.sample(profile, &mut rng);
        if label == 0 {
            if let Profile::Structuring | Profile::Burst | Profile::Mule = profile {
                // keep only one borrowed trait, resample the rest as benign
                let benign = sampler.sample(Profile::Benign, &mut rng);
                let keep = rng.random_range(0..TX_FEATURES);
                for (j, v) in benign.into_iter().enumerate() {
                    if j != keep && !(j == 0 && keep == 2) && !(j == 2 && keep == 0) {
                        features[j] = v;
                    }
                }
            }
        }

        let mut sender = rng.random_range(0..n_acc);
        let mut receiver = rng.random_range(0..n_acc - 1);
        if receiver >= sender {
            receiver += 1;
        }
        if label == 1 && !high_pool.is_empty() && rng.random_bool(config.flag_crime_correlation)
        {
            let risky = high_pool[rng.random_range(0..high_pool.len())];
            if rng.random_bool(0.6) {
                receiver = risky;
                if sender == receiver {
                    sender = (sender + 1) % n_acc;
                }
            } else {
                sender = risky;
                if sender == receiver {
                    receiver = (receiver + 1) % n_acc;
                }
            }
        }
        transactions.push(TransactionRecord {
            tx_id: tx_id as u64,
            features,
            sender: ids[sender].clone(),
            receiver: ids[receiver].clone(),
            label,
        });
    }

    let accounts: BTreeMap<AccountId, AccountRecord> = ids
        .iter()
        .zip(&flags)
        .map(|(id, &f)| {
            (
                id.clone(),
                AccountRecord {
                    account_id: id.clone(),
                    flag: Flag(f),
                },
            )
        })
        .collect();

    Ok(Dataset {
        transactions,
        accounts,
        train: (0..n_train).collect(),
        test: (n_train..n_train + n_test).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GenConfig {
        GenConfig {
            n_train: 10_000,
            n_accounts: 2_000,
            seed,
            ..GenConfig::default()
        }
    }

    #[test]
    fn counts_follow_config() {
        let ds = generate(&small(7)).unwrap();
        assert_eq!(ds.train.len(), 10_000);
        assert_eq!(ds.test.len(), 2_500);
        let pos = ds.labels(&ds.train).iter().filter(|&&l| l == 1).count();
        assert_eq!(pos, 100);
        ds.validate().unwrap();
    }

    #[test]
    fn rejects_single_account() {
        let cfg = GenConfig {
            n_accounts: 1,
            ..small(1)
        };
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(
            generate(&small(3)).unwrap().transactions,
            generate(&small(4)).unwrap().transactions
        );
    }

    #[test]
    fn flags_correlate_with_crime() {
        let cfg = GenConfig {
            flag_crime_correlation: 0.9,
            ..small(11)
        };
        let ds = generate(&cfg).unwrap();
        let touches_high = |t: &TransactionRecord| {
            ds.flag_of(&t.sender).unwrap().is_high_risk()
                || ds.flag_of(&t.receiver).unwrap().is_high_risk()
        };
        let rate = |label: u8| {
            let rows: Vec<_> = ds.transactions.iter().filter(|t| t.label == label).collect();
            rows.iter().filter(|t| touches_high(t)).count() as f64 / rows.len() as f64
        };
        let gap = rate(1) - rate(0);
        assert!(gap > 0.3, "gap {gap}");
    }
}

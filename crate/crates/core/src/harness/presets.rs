use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{EvalSpec, ExperimentConfig, MetricsReport, Session, Setting};
use super::red_team::attack_suite;
use crate::data::Sampling;
use crate::error::{Error, Result};
use crate::federation::RoundSchedule;
use crate::models::ClassifierKind;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
    Table5,
    Fig4,
    Attacks,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Table1,
        Preset::Table2,
        Preset::Table3,
        Preset::Table4,
        Preset::Table5,
        Preset::Fig4,
        Preset::Attacks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
            Preset::Table5 => "table5",
            Preset::Fig4 => "fig4",
            Preset::Attacks => "attacks",
        }
    }

    /// CSV header of the preset's output.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Preset::Fig4 => &["variance", "aucpr", "avg_l2", "avg_cos"],
            Preset::Attacks => &["attack", "metric", "value"],
            _ => &["label", "precision", "recall", "f1", "aucpr"],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown preset {s:?}")))
    }
}

/// Rows of the sampling sweep.
pub const SAMPLINGS: [Sampling; 4] = [
    Sampling::RandomUnder,
    Sampling::RandomOver,
    Sampling::Smote,
    Sampling::Reweight,
];
/// Schedule sweep as (interval, rounds).
pub const SCHEDULES: [(usize, usize); 4] = [(1, 50), (5, 10), (10, 5), (50, 1)];
pub const CLIENT_COUNTS: [usize; 5] = [1, 10, 50, 100, 200];
pub const FRACTIONS: [f64; 5] = [1.0, 0.5, 0.1, 0.01, 0.002];
pub const VARIANCES: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 0.5];
/// Noise draws averaged per variance.
pub const FIG4_SEEDS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRow {
    /// Leading key columns (one, or two for the attack table).
    pub keys: Vec<String>,
    pub values: Vec<f64>,
}

/// One preset's table plus the full report behind each row where there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub preset: Preset,
    pub rows: Vec<PresetRow>,
    pub reports: Vec<MetricsReport>,
}

impl PresetReport {
    /// The row whose keys, joined with `/`, equal `label`.
    pub fn row(&self, label: &str) -> Option<&PresetRow> {
        self.rows.iter().find(|r| r.keys.join("/") == label)
    }

    pub fn value(&self, label: &str, column: &str) -> Option<f64> {
        let j = self.preset.columns().iter().position(|c| *c == column)?;
        let r = self.row(label)?;
        j.checked_sub(r.keys.len()).map(|k| r.values[k])
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.preset.columns())?;
        for r in &self.rows {
            let mut rec = r.keys.clone();
            rec.extend(r.values.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
    }

    /// Writes `<preset>.csv` and `<preset>.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.csv", self.preset)), self.to_csv()?)?;
        fs::write(dir.join(format!("{}.json", self.preset)), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn metric_row(label: impl Into<String>, r: &MetricsReport) -> PresetRow {
    PresetRow {
        keys: vec![label.into()],
        values: vec![r.precision, r.recall, r.f1, r.aucpr],
    }
}

/// Sweeps the preset's grid around `base`. Knobs the preset does not sweep
/// keep their values from `base`.
pub fn run_preset(preset: Preset, base: &ExperimentConfig) -> Result<PresetReport> {
    base.validate()?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut push = |label: String, r: MetricsReport| {
        rows.push(metric_row(label, &r));
        reports.push(r);
    };
    match preset {
        Preset::Table1 => {
            for setting in Setting::ALL {
                let noise_var = if setting == Setting::Hyfl { base.noise_var } else { 0.0 };
                let cfg = ExperimentConfig {
                    setting,
                    noise_var,
                    ..base.clone()
                };
                let mut s = Session::prepare(&cfg)?;
                for kind in [
                    ClassifierKind::Gbdt,
                    ClassifierKind::LinearSvm,
                    ClassifierKind::LogReg,
                    ClassifierKind::Mlp,
                ] {
                    let e = s.evaluate(&cfg.eval_spec().with_classifier(kind))?;
                    push(format!("{setting}/{kind}"), e.report);
                }
            }
        }
        Preset::Table2 => {
            let mut s = Session::prepare(base)?;
            for sampling in SAMPLINGS {
                let spec = EvalSpec {
                    sampling,
                    ..base.eval_spec()
                };
                push(sampling.label().to_string(), s.evaluate(&spec)?.report);
            }
        }
        Preset::Table3 => {
            for (interval, rounds) in SCHEDULES {
                let cfg = ExperimentConfig {
                    clients: 100,
                    schedule: RoundSchedule::new(interval, rounds)?,
                    ..base.clone()
                };
                let r = Session::prepare(&cfg)?.evaluate(&cfg.eval_spec())?.report;
                push(cfg.schedule.label(), r);
            }
        }
        Preset::Table4 => {
            for clients in CLIENT_COUNTS {
                let cfg = ExperimentConfig {
                    clients,
                    ..base.clone()
                };
                let r = Session::prepare(&cfg)?.evaluate(&cfg.eval_spec())?.report;
                push(clients.to_string(), r);
            }
        }
        Preset::Table5 => {
            let mut s = Session::prepare(base)?;
            for data_fraction in FRACTIONS {
                let spec = EvalSpec {
                    data_fraction,
                    ..base.eval_spec()
                };
                push(data_fraction.to_string(), s.evaluate(&spec)?.report);
            }
        }
        Preset::Fig4 => {
            let mut s = Session::prepare(base)?;
            for noise_var in VARIANCES {
                let mut sums = [0.0; 3];
                for k in 0..FIG4_SEEDS {
                    let spec = EvalSpec {
                        noise_var,
                        seed: seed::derive_n(base.seed, "fig4", k),
                        ..base.eval_spec()
                    };
                    let r = s.evaluate(&spec)?.report;
                    let (l2, cos) = r.privacy.map_or((0.0, 1.0), |p| (p.avg_l2, p.avg_cos));
                    sums[0] += r.aucpr;
                    sums[1] += l2;
                    sums[2] += cos;
                    reports.push(r);
                }
                rows.push(PresetRow {
                    keys: vec![noise_var.to_string()],
                    values: sums.iter().map(|v| v / FIG4_SEEDS as f64).collect(),
                });
            }
        }
        Preset::Attacks => {
            for report in attack_suite(base)? {
                for (metric, value) in &report.metrics {
                    rows.push(PresetRow {
                        keys: vec![report.attack.to_string(), metric.clone()],
                        values: vec![*value],
                    });
                }
            }
        }
    }
    Ok(PresetReport { preset, rows, reports })
}

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::metrics::{aucpr, prf1};
use crate::attacks::AttackReport;
use crate::data::{generate, shard_accounts, stratified_subset, Dataset, GenConfig, Sampling};
use crate::error::{Error, PhaseExt, Result};
use crate::federation::{
    fit_transaction_model, scan_isolation, Federation, IsolationReport, LocalFit, ProtocolConfig, RoundSchedule,
    SensitiveValues, TrainPlan,
};
use crate::matrix::Matrix;
use crate::models::{AeConfig, AeTrainer, Autoencoder, Classifier, ClassifierConfig, ClassifierKind};
use crate::privacy::{noise_metrics, NoiseMetrics, NoiseSpec};
use crate::seed;
use crate::transport::{InProcessBus, Network, RouteMode, TcpNetwork};

/// Where account features live during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// One party holds everything; no network.
    Centralized,
    /// Federated, with plain updates and embeddings.
    Vanilla,
    /// Federated with masked aggregation and sealed embeddings.
    #[default]
    Hyfl,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Centralized, Setting::Vanilla, Setting::Hyfl];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Centralized => "centralized",
            Setting::Vanilla => "vanilla",
            Setting::Hyfl => "hyfl",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown setting {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    InProcess,
    /// Loopback TCP, one listener per node.
    Tcp,
}

/// One end-to-end run. Every field has a default, so a JSON config only
/// needs the knobs it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: GenConfig,
    pub setting: Setting,
    /// Number of account clients.
    pub clients: usize,
    pub schedule: RoundSchedule,
    pub autoencoder: AeConfig,
    pub classifier: ClassifierConfig,
    /// Variance of the Gaussian noise on standardised training rows.
    pub noise_var: f64,
    pub sampling: Sampling,
    pub route: RouteMode,
    pub weighted: bool,
    /// Share of the training split used, per class.
    pub data_fraction: f64,
    pub transport: TransportKind,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: GenConfig::default(),
            setting: Setting::Hyfl,
            clients: 10,
            schedule: RoundSchedule::default(),
            autoencoder: AeConfig::default(),
            classifier: ClassifierConfig::default(),
            noise_var: 0.01,
            sampling: Sampling::None,
            route: RouteMode::ServerRouted,
            weighted: false,
            data_fraction: 1.0,
            transport: TransportKind::InProcess,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.protocol().validate()?;
        self.eval_spec().validate()?;
        if self.clients == 0 {
            return Err(Error::config("at least one account client is required"));
        }
        if self.clients > self.data.n_accounts {
            return Err(Error::config(format!(
                "{} clients but only {} accounts",
                self.clients, self.data.n_accounts
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            secure: self.setting == Setting::Hyfl,
            route: self.route,
            weighted: self.weighted,
            schedule: self.schedule,
            autoencoder: self.autoencoder.clone(),
            seed: self.seed,
        }
    }

    pub fn eval_spec(&self) -> EvalSpec {
        EvalSpec {
            classifier: self.classifier.clone(),
            sampling: self.sampling,
            noise_var: self.noise_var,
            data_fraction: self.data_fraction,
            seed: self.seed,
        }
    }
}

/// The part of an experiment that runs after feature learning and the join,
/// so one prepared session can be evaluated under many of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub classifier: ClassifierConfig,
    pub sampling: Sampling,
    pub noise_var: f64,
    pub data_fraction: f64,
    pub seed: u64,
}

impl EvalSpec {
    pub fn validate(&self) -> Result<()> {
        NoiseSpec::new(self.noise_var, 0)?;
        self.classifier.train.validate()?;
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::config(format!("data fraction {} outside (0, 1]", self.data_fraction)));
        }
        Ok(())
    }

    pub fn with_classifier(mut self, kind: ClassifierKind) -> Self {
        self.classifier = ClassifierConfig::for_kind(kind);
        self
    }

    fn plan(&self) -> Result<TrainPlan> {
        Ok(TrainPlan {
            classifier: self.classifier.clone().with_seed(seed::derive(self.seed, "classifier")),
            noise: NoiseSpec::new(self.noise_var, seed::derive(self.seed, "noise"))?,
            sampling: self.sampling,
            sampling_seed: seed::derive(self.seed, "sampling"),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub prepare_secs: f64,
    pub train_secs: f64,
    pub infer_secs: f64,
}

impl Runtime {
    pub fn total_secs(&self) -> f64 {
        self.prepare_secs + self.train_secs + self.infer_secs
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub train_rows: usize,
    pub train_positives: usize,
    pub test_rows: usize,
    pub test_positives: usize,
    pub accounts: usize,
    /// Frames on the wire so far (zero when centralised).
    pub frames: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub aucpr: f64,
    /// Distortion of the training rows; present when noise was added.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy: Option<NoiseMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attacks: Vec<AttackReport>,
    pub runtime: Runtime,
    pub counts: Counts,
    pub config: ExperimentConfig,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("aucpr", self.aucpr),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        self.attacks.iter().try_for_each(AttackReport::validate)
    }

    pub const CSV_HEADER: [&'static str; 15] = [
        "setting",
        "classifier",
        "sampling",
        "clients",
        "schedule",
        "noise_var",
        "data_fraction",
        "route",
        "precision",
        "recall",
        "f1",
        "aucpr",
        "avg_l2",
        "avg_cos",
        "runtime_secs",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        let c = &self.config;
        let (l2, cos) = self
            .privacy
            .map(|p| (p.avg_l2.to_string(), p.avg_cos.to_string()))
            .unwrap_or_default();
        vec![
            c.setting.to_string(),
            c.classifier.kind.to_string(),
            c.sampling.label().to_string(),
            c.clients.to_string(),
            c.schedule.label(),
            c.noise_var.to_string(),
            c.data_fraction.to_string(),
            c.route.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.f1.to_string(),
            self.aucpr.to_string(),
            l2,
            cos,
            format!("{:.3}", self.runtime.total_secs()),
        ]
    }

    /// Writes `metrics.json` and a one-row `results.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        w.flush()?;
        Ok(())
    }
}

/// Scores and model of one evaluation, next to its report.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub classifier: Classifier,
    /// Test scores in test-split order, with their labels.
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Network for Box<dyn Network> {
    fn register(&mut self, node: &str) -> Result<()> {
        (**self).register(node)
    }
    fn unregister(&mut self, node: &str) {
        (**self).unregister(node)
    }
    fn is_registered(&self, node: &str) -> bool {
        (**self).is_registered(node)
    }
    fn send(&mut self, from: &str, to: &str, msg: &crate::transport::ProtocolMessage) -> Result<crate::transport::Receipt> {
        (**self).send(from, to, msg)
    }
    fn next_delivery(&mut self) -> Result<Option<crate::transport::Delivery>> {
        (**self).next_delivery()
    }
    fn transcript(&self) -> &crate::transport::Transcript {
        (**self).transcript()
    }
}

enum Engine {
    Centralized { test: Matrix },
    Federated(Box<Federation<Box<dyn Network>>>),
}

/// Everything up to and including the training join: data, shards, the
/// feature-learning phase and the joined training matrix. Classifier
/// training and inference happen per [`Session::evaluate`].
pub struct Session {
    config: ExperimentConfig,
    dataset: Dataset,
    autoencoder: Autoencoder,
    engine: Engine,
    train: Matrix,
    train_labels: Vec<u8>,
    test_labels: Vec<u8>,
    prepare_time: Duration,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("setting", &self.config.setting)
            .field("train_rows", &self.train.rows())
            .finish_non_exhaustive()
    }
}

/// Encodes every account's flag, in account-id order.
fn encoded_accounts(ds: &Dataset) -> Matrix {
    let rows: Vec<_> = ds.accounts.values().map(|a| a.flag.encode()).collect();
    Matrix::from_rows(&rows).expect("fixed width")
}

/// Joins rows locally with a known encoder, in the same layout the
/// transaction client builds from embedding replies.
pub fn join_locally(ds: &Dataset, ae: &Autoencoder, idx: &[usize]) -> Result<Matrix> {
    let mut out = Matrix::zeros(0, 2 * ae.latent_dim() + crate::data::TX_FEATURES);
    let mut buf = Vec::with_capacity(out.cols());
    for &i in idx {
        let tx = &ds.transactions[i];
        buf.clear();
        for acc in [&tx.sender, &tx.receiver] {
            let flag = ds.flag_of(acc).ok_or_else(|| Error::UnknownAccount(acc.to_string()))?;
            buf.extend(ae.encode(&flag.encode())?);
        }
        buf.extend_from_slice(&tx.features);
        out.push_row(&buf)?;
    }
    Ok(out)
}

/// The feature-learning phase with all accounts in one place, following the
/// trajectory client 1 would take alone.
pub fn train_autoencoder_centrally(ds: &Dataset, protocol: &ProtocolConfig) -> Result<Autoencoder> {
    let mut ae = Autoencoder::from_config(&protocol.autoencoder, protocol.init_seed());
    let mut trainer = AeTrainer::new(protocol.client_train_spec(1))?;
    let x = encoded_accounts(ds);
    for _ in 0..protocol.schedule.rounds {
        trainer.train(&mut ae, &x, protocol.schedule.interval)?;
    }
    Ok(ae)
}

impl Session {
    pub fn prepare(config: &ExperimentConfig) -> Result<Session> {
        config.validate()?;
        let dataset = generate(&config.data).phase("generate")?;
        Self::prepare_with(config, dataset)
    }

    /// Like [`Session::prepare`] but on a given dataset (`config.data` is
    /// only echoed).
    pub fn prepare_with(config: &ExperimentConfig, dataset: Dataset) -> Result<Session> {
        config.validate()?;
        dataset.validate().phase("load")?;
        let start = Instant::now();
        let protocol = config.protocol();
        let train_labels = dataset.labels(&dataset.train);
        let test_labels = dataset.labels(&dataset.test);
        let (autoencoder, engine, train) = match config.setting {
            Setting::Centralized => {
                let ae = train_autoencoder_centrally(&dataset, &protocol).phase("feature learning")?;
                let train = join_locally(&dataset, &ae, &dataset.train).phase("join")?;
                let test = join_locally(&dataset, &ae, &dataset.test).phase("join")?;
                (ae, Engine::Centralized { test }, train)
            }
            Setting::Vanilla | Setting::Hyfl => {
                let shards =
                    shard_accounts(&dataset, config.clients, seed::derive(config.seed, "shards")).phase("shard")?;
                let net: Box<dyn Network> = match config.transport {
                    TransportKind::InProcess => Box::new(InProcessBus::new(config.seed)),
                    TransportKind::Tcp => Box::new(TcpNetwork::new(Duration::from_secs(60))),
                };
                let mut fed =
                    Federation::new(net, &shards, dataset.transactions.clone(), protocol).phase("setup")?;
                let ae = fed.run_feature_learning().phase("feature learning")?;
                let joined = fed.extract_and_join(&dataset.train).phase("join")?;
                if let Some((row, why)) = joined.errors.first() {
                    return Err(Error::protocol(format!(
                        "{} training rows could not be joined (first: row {row}, {why})",
                        joined.errors.len()
                    )))
                    .phase("join");
                }
                (ae, Engine::Federated(Box::new(fed)), joined.matrix)
            }
        };
        Ok(Session {
            config: config.clone(),
            dataset,
            autoencoder,
            engine,
            train,
            train_labels,
            test_labels,
            prepare_time: start.elapsed(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// The final shared autoencoder.
    pub fn autoencoder(&self) -> &Autoencoder {
        &self.autoencoder
    }

    /// The joined training matrix, before standardisation.
    pub fn train_matrix(&self) -> &Matrix {
        &self.train
    }

    pub fn train_labels(&self) -> &[u8] {
        &self.train_labels
    }

    pub fn federation(&self) -> Option<&Federation<Box<dyn Network>>> {
        match &self.engine {
            Engine::Federated(f) => Some(f),
            Engine::Centralized { .. } => None,
        }
    }

    /// What the isolation audit looks for: the initial and final shared
    /// models, every account's embedding and every transaction's features.
    pub fn sensitive_values(&self) -> SensitiveValues {
        let init = Autoencoder::from_config(&self.config.autoencoder, self.config.protocol().init_seed());
        let embeddings = self
            .dataset
            .accounts
            .values()
            .map(|a| self.autoencoder.encode(&a.flag.encode()).expect("encoding width"))
            .collect();
        SensitiveValues {
            model_params: vec![init.flatten(), self.autoencoder.flatten()],
            embeddings,
            tx_features: self.dataset.transactions.iter().map(|t| t.features.to_vec()).collect(),
        }
    }

    /// Scans everything sent so far; `None` for a centralised session.
    pub fn audit(&self) -> Option<Result<IsolationReport>> {
        self.federation()
            .map(|f| scan_isolation(f.transcript(), &self.sensitive_values()))
    }

    /// Trains the classifier under `spec`, scores the test split and
    /// computes the metric suite.
    pub fn evaluate(&mut self, spec: &EvalSpec) -> Result<Evaluation> {
        spec.validate()?;
        let plan = spec.plan()?;
        let keep = stratified_subset(&self.train_labels, spec.data_fraction, seed::derive(spec.seed, "fraction"))?;
        let (rows, labels) = if keep.len() == self.train.rows() {
            (self.train.clone(), self.train_labels.clone())
        } else {
            (self.train.select_rows(&keep), keep.iter().map(|&k| self.train_labels[k]).collect())
        };
        let latent = self.autoencoder.latent_dim();

        let t = Instant::now();
        let fit: LocalFit = match &mut self.engine {
            Engine::Centralized { .. } => fit_transaction_model(&rows, &labels, &plan, latent),
            Engine::Federated(fed) => fed.train_phase(&rows, &labels, &plan),
        }
        .phase("train")?;
        let train_secs = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let scores = match &mut self.engine {
            Engine::Centralized { test } => fit.classifier.predict_batch(&fit.stats.apply(test)?),
            Engine::Federated(fed) => {
                let ids: Vec<u64> = self.dataset.test.iter().map(|&i| self.dataset.transactions[i].tx_id).collect();
                let out = fed.infer(&ids)?;
                if let Some((id, why)) = out.errors.first() {
                    Err(Error::protocol(format!("{} test rows unscored (first: {id}, {why})", out.errors.len())))
                } else {
                    Ok(out.scores.into_iter().map(|(_, s)| s).collect())
                }
            }
        }
        .phase("inference")?;
        let infer_secs = t.elapsed().as_secs_f64();

        let p = prf1(&scores, &self.test_labels, 0.5).phase("metrics")?;
        let area = aucpr(&scores, &self.test_labels).phase("metrics")?;
        let privacy = if spec.noise_var > 0.0 {
            Some(noise_metrics(&fit.clean, &fit.noisy)?)
        } else {
            None
        };
        let (frames, bytes) = self.federation().map_or((0, 0), |f| {
            let t = f.transcript();
            (t.len(), t.entries().iter().map(|e| e.frame.encoded_len()).sum())
        });
        let mut config = self.config.clone();
        config.classifier = spec.classifier.clone();
        config.sampling = spec.sampling;
        config.noise_var = spec.noise_var;
        config.data_fraction = spec.data_fraction;
        let report = MetricsReport {
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
            aucpr: area,
            privacy,
            attacks: Vec::new(),
            runtime: Runtime {
                prepare_secs: self.prepare_time.as_secs_f64(),
                train_secs,
                infer_secs,
            },
            counts: Counts {
                train_rows: labels.len(),
                train_positives: labels.iter().filter(|&&y| y == 1).count(),
                test_rows: self.test_labels.len(),
                test_positives: self.test_labels.iter().filter(|&&y| y == 1).count(),
                accounts: self.dataset.accounts.len(),
                frames,
                bytes,
            },
            config,
        };
        Ok(Evaluation {
            report,
            classifier: fit.classifier,
            scores,
            labels: self.test_labels.clone(),
        })
    }
}

/// generate → shard → feature learning → join → rebalance → train → infer
/// → metrics. Writes `metrics.json` and `results.csv` when `out` is given.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<MetricsReport> {
    let mut session = Session::prepare(config)?;
    let report = session.evaluate(&config.eval_spec())?.report;
    if let Some(dir) = out {
        report.write_to(dir)?;
    }
    Ok(report)
}

//! Drive the three phases by hand: federated autoencoder training, the
//! embedding join on the transaction client, then local training and scoring.

use hyfl::data::{generate, shard_accounts, GenConfig, Sampling};
use hyfl::federation::{Federation, ProtocolConfig, RoundSchedule, TrainPlan};
use hyfl::harness::aucpr;
use hyfl::models::{ClassifierConfig, ClassifierKind};
use hyfl::privacy::NoiseSpec;
use hyfl::transport::{InProcessBus, MsgType, RouteMode};

fn main() -> hyfl::Result<()> {
    let ds = generate(&GenConfig {
        n_train: 10_000,
        n_accounts: 2_000,
        seed: 1,
        ..Default::default()
    })?;
    let shards = shard_accounts(&ds, 5, 1)?;
    let cfg = ProtocolConfig {
        secure: true,
        route: RouteMode::ServerRouted,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    let mut fed = Federation::new(InProcessBus::new(1), &shards, ds.transactions.clone(), cfg)?;

    let ae = fed.run_feature_learning()?;
    println!("autoencoder trained: {} parameters", ae.param_count());

    let joined = fed.extract_and_join(&ds.train)?;
    println!("joined {} rows x {} columns", joined.matrix.rows(), joined.matrix.cols());

    let plan = TrainPlan {
        classifier: ClassifierConfig::for_kind(ClassifierKind::Gbdt),
        noise: NoiseSpec::new(0.01, 2)?,
        sampling: Sampling::None,
        sampling_seed: 3,
    };
    fed.train_phase(&joined.matrix, &ds.labels(&joined.rows), &plan)?;

    let ids: Vec<u64> = ds.test.iter().map(|&i| ds.transactions[i].tx_id).collect();
    let scored = fed.infer(&ids)?;
    let scores: Vec<f64> = scored.scores.iter().map(|(_, s)| *s).collect();
    println!("test AUCPR {:.4}", aucpr(&scores, &ds.labels(&ds.test))?);

    let t = fed.transcript();
    println!(
        "{} frames: {} model updates, {} embedding queries",
        t.len(),
        t.count(MsgType::ModelUpdate),
        t.count(MsgType::EmbeddingQuery)
    );
    Ok(())
}

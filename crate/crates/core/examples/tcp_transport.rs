//! The same federation over loopback TCP: one listener per node, identical
//! results to the in-process bus.

use std::time::Duration;

use hyfl::data::{generate, shard_accounts, GenConfig};
use hyfl::federation::{Federation, ProtocolConfig, RoundSchedule};
use hyfl::transport::{InProcessBus, RouteMode, TcpNetwork};

fn main() -> hyfl::Result<()> {
    let ds = generate(&GenConfig {
        n_train: 2_000,
        n_accounts: 400,
        ..Default::default()
    })?;
    let shards = shard_accounts(&ds, 3, 0)?;
    let cfg = ProtocolConfig {
        secure: true,
        route: RouteMode::P2p,
        schedule: RoundSchedule::new(1, 3)?,
        ..Default::default()
    };

    let net = TcpNetwork::new(Duration::from_secs(10));
    let mut tcp = Federation::new(net, &shards, ds.transactions.clone(), cfg.clone())?;
    let mut local = Federation::new(InProcessBus::new(0), &shards, ds.transactions.clone(), cfg)?;

    let over_tcp = tcp.run_feature_learning()?;
    let in_process = local.run_feature_learning()?;
    let rows: Vec<usize> = ds.train.iter().copied().take(200).collect();
    let a = tcp.extract_and_join(&rows)?;
    let b = local.extract_and_join(&rows)?;
    println!("frames over TCP: {}", tcp.transcript().len());
    println!("same autoencoder: {}", over_tcp == in_process);
    println!("same joined rows: {}", a == b);
    Ok(())
}

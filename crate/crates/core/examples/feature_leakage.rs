//! How much of an account's private flag can be read back from its
//! embedding, against guessing from the label prior.

use hyfl::attacks::LeakageSpec;
use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{leakage_on, ExperimentConfig, Session, Setting};

fn main() -> hyfl::Result<()> {
    let cfg = ExperimentConfig {
        data: GenConfig {
            n_train: 10_000,
            n_accounts: 3_000,
            ..Default::default()
        },
        setting: Setting::Centralized,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    let session = Session::prepare(&cfg)?;
    let report = leakage_on(session.dataset(), session.autoencoder(), &LeakageSpec::default())?;
    for (k, v) in &report.metrics {
        println!("{k:>16} {v:.4}");
    }
    Ok(())
}

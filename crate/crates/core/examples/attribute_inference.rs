//! Complete a hidden column (the first transaction feature) of known
//! training rows by querying the trained model.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{attribute_on, AttributeScenario, ExperimentConfig, Session, Setting};

fn main() -> hyfl::Result<()> {
    let cfg = ExperimentConfig {
        data: GenConfig {
            n_train: 10_000,
            n_accounts: 2_000,
            ..Default::default()
        },
        setting: Setting::Centralized,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    let session = Session::prepare(&cfg)?;
    let column = 2 * session.autoencoder().latent_dim();
    let report = attribute_on(
        session.train_matrix(),
        session.train_labels(),
        &AttributeScenario {
            column,
            ..Default::default()
        },
    )?;
    for (k, v) in &report.metrics {
        println!("{k:>20} {v:.4}");
    }
    Ok(())
}

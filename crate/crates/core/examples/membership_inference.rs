//! Shadow-model membership inference against a classifier trained on joined
//! rows, with and without noise on its training data.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{membership_on, ExperimentConfig, MembershipScenario, Session, Setting};

fn main() -> hyfl::Result<()> {
    let cfg = ExperimentConfig {
        data: GenConfig {
            n_train: 10_000,
            n_accounts: 2_000,
            positive_rate: 0.05,
            ..Default::default()
        },
        setting: Setting::Centralized,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    let session = Session::prepare(&cfg)?;
    for noise_var in [0.0, 0.1] {
        let report = membership_on(
            session.train_matrix(),
            session.train_labels(),
            &MembershipScenario {
                noise_var,
                ..Default::default()
            },
        )?;
        let m = |k: &str| report.metric(k).unwrap_or(f64::NAN);
        println!("noise {noise_var}: attack auc {:.3}, accuracy {:.3}", m("auc"), m("accuracy"));
    }
    Ok(())
}

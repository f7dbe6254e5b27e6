//! Compare the centralized, vanilla federated and secured federated settings
//! on the same data with one call per setting.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{run_experiment, ExperimentConfig, Setting};

fn main() -> hyfl::Result<()> {
    let base = ExperimentConfig {
        data: GenConfig {
            n_train: 10_000,
            n_accounts: 2_000,
            ..Default::default()
        },
        clients: 5,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    for setting in Setting::ALL {
        let cfg = ExperimentConfig {
            setting,
            noise_var: if setting == Setting::Hyfl { base.noise_var } else { 0.0 },
            ..base.clone()
        };
        let r = run_experiment(&cfg, None)?;
        println!(
            "{:<12} aucpr {:.4}  f1 {:.4}  frames {:>5}  {:.1}s",
            setting.name(),
            r.aucpr,
            r.f1,
            r.counts.frames,
            r.runtime.total_secs()
        );
    }
    Ok(())
}

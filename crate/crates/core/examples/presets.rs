//! Run a preset sweep on a reduced configuration and print it as CSV.
//! Pass a preset name (table1..table5, fig4, attacks); defaults to table5.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{run_preset, ExperimentConfig, Preset};

fn main() -> hyfl::Result<()> {
    let preset: Preset = std::env::args().nth(1).as_deref().unwrap_or("table5").parse()?;
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
    print!("{}", run_preset(preset, &base)?.to_csv()?);
    Ok(())
}

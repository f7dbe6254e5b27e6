//! Gaussian noise on the joined training rows: how much it distorts them and
//! what it costs in AUCPR. Feature learning runs once; only the last phase
//! repeats.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{EvalSpec, ExperimentConfig, Session};

fn main() -> hyfl::Result<()> {
    let cfg = ExperimentConfig {
        data: GenConfig {
            n_train: 10_000,
            n_accounts: 2_000,
            ..Default::default()
        },
        clients: 5,
        schedule: RoundSchedule::new(2, 5)?,
        ..Default::default()
    };
    let mut session = Session::prepare(&cfg)?;
    println!("{:>8} {:>8} {:>8} {:>8}", "variance", "aucpr", "avg_l2", "avg_cos");
    for noise_var in [0.0, 1e-3, 1e-2, 1e-1, 0.5] {
        let r = session
            .evaluate(&EvalSpec {
                noise_var,
                ..cfg.eval_spec()
            })?
            .report;
        let (l2, cos) = r.privacy.map_or((0.0, 1.0), |p| (p.avg_l2, p.avg_cos));
        println!("{noise_var:>8} {:>8.4} {l2:>8.4} {cos:>8.4}", r.aucpr);
    }
    Ok(())
}

//! Recover an account's flag encoding from the single-step update its client
//! would send, with and without noise on that update.

use hyfl::data::Flag;
use hyfl::harness::{invert_update, InversionScenario};
use hyfl::models::{AeConfig, Autoencoder};

fn main() -> hyfl::Result<()> {
    let c = AeConfig::default();
    let model = Autoencoder::new(c.input_dim, c.hidden, c.latent_dim, 3);
    let secret = Flag::new(9)?.encode();
    for noise_var in [0.0, 1e-6, 1e-4] {
        let report = invert_update(
            &model,
            &secret,
            &InversionScenario {
                noise_var,
                ..Default::default()
            },
        )?;
        let m = |k: &str| report.metric(k).unwrap_or(f64::NAN);
        println!(
            "noise {noise_var:e}: gradient cosine {:.4}, input cosine {:.4}, input l2 {:.4}",
            m("objective_cos"),
            m("input_cos"),
            m("input_l2")
        );
    }
    Ok(())
}

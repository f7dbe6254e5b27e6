//! Train once, then score new transactions through the federation and save
//! the classifier to disk.

use hyfl::data::GenConfig;
use hyfl::federation::RoundSchedule;
use hyfl::harness::{prf1, ExperimentConfig, Session};
use hyfl::models::SavedModel;

fn main() -> hyfl::Result<()> {
    let cfg = ExperimentConfig {
        data: GenConfig {
            n_train: 8_000,
            n_accounts: 1_500,
            ..Default::default()
        },
        clients: 4,
        schedule: RoundSchedule::new(2, 3)?,
        ..Default::default()
    };
    let mut session = Session::prepare(&cfg)?;
    let eval = session.evaluate(&cfg.eval_spec())?;
    for threshold in [0.1, 0.3, 0.5, 0.7] {
        let p = prf1(&eval.scores, &eval.labels, threshold)?;
        println!("threshold {threshold}: precision {:.3} recall {:.3} f1 {:.3}", p.precision, p.recall, p.f1);
    }

    let path = std::env::temp_dir().join("hyfl-classifier.json");
    SavedModel::Classifier(eval.classifier).save(&path)?;
    println!("classifier saved to {}", path.display());
    Ok(())
}

//! Experiment runner, presets, attack scenarios and evaluation metrics.

mod experiment;
mod metrics;
mod presets;
mod red_team;

pub use experiment::{
    join_locally, run_experiment, train_autoencoder_centrally, Counts, EvalSpec, Evaluation, ExperimentConfig,
    MetricsReport, Runtime, Session, Setting, TransportKind,
};
pub use metrics::{aucpr, prf1, roc_auc, Prf1};
pub use presets::{
    run_preset, Preset, PresetReport, PresetRow, CLIENT_COUNTS, FIG4_SEEDS, FRACTIONS, SAMPLINGS, SCHEDULES, VARIANCES,
};
pub use red_team::{
    attack_suite, attribute_on, invert_update, leakage_on, membership_on, run_attack, AttributeScenario,
    InversionScenario, MembershipScenario,
};

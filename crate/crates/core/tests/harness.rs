use std::process::Command;

use hyfl::data::{read_dataset, GenConfig};
use hyfl::federation::RoundSchedule;
use hyfl::harness::{
    prf1, run_experiment, run_preset, EvalSpec, ExperimentConfig, MetricsReport, Preset, Session, Setting, FRACTIONS,
    SAMPLINGS, VARIANCES,
};
use hyfl::models::ClassifierKind;

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        data: GenConfig {
            n_train: 3_000,
            n_accounts: 600,
            positive_rate: 0.05,
            seed: 2,
            ..Default::default()
        },
        clients: 4,
        schedule: RoundSchedule::new(2, 2).unwrap(),
        seed: 2,
        ..Default::default()
    };
    c.classifier.gbdt.rounds = 20;
    c
}

/// Everything but wall-clock time.
fn strip_runtime(mut r: MetricsReport) -> MetricsReport {
    r.runtime = Default::default();
    r
}

#[test]
fn half_the_data_keeps_half_of_each_class() {
    let cfg = small();
    let mut s = Session::prepare(&cfg).unwrap();
    let full = s.evaluate(&cfg.eval_spec()).unwrap().report.counts;
    let half = s
        .evaluate(&EvalSpec {
            data_fraction: 0.5,
            ..cfg.eval_spec()
        })
        .unwrap()
        .report
        .counts;
    let pos = |c: &hyfl::harness::Counts| c.train_positives as f64;
    let neg = |c: &hyfl::harness::Counts| (c.train_rows - c.train_positives) as f64;
    assert!((pos(&half) - pos(&full) / 2.0).abs() <= 1.0);
    assert!((neg(&half) - neg(&full) / 2.0).abs() <= 1.0);
    assert_eq!(half.test_rows, full.test_rows);
}

#[test]
fn experiments_are_reproducible() {
    let cfg = small();
    let a = strip_runtime(run_experiment(&cfg, None).unwrap());
    let b = strip_runtime(run_experiment(&cfg, None).unwrap());
    assert_eq!(a, b);
    a.validate().unwrap();
    assert!(a.counts.frames > 0 && a.counts.bytes > 0);
    assert!(a.privacy.is_some());

    let central = run_experiment(
        &ExperimentConfig {
            setting: Setting::Centralized,
            noise_var: 0.0,
            ..cfg
        },
        None,
    )
    .unwrap();
    assert_eq!(central.counts.frames, 0);
    assert!(central.privacy.is_none());
}

#[test]
fn reports_land_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(), Some(dir.path())).unwrap();
    let back: MetricsReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    let mut rd = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), MetricsReport::CSV_HEADER);
    let rows: Vec<_> = rd.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "hyfl");
    assert_eq!(&rows[0][4], report.config.schedule.label());
}

#[test]
fn presets_have_their_row_labels() {
    let base = small();
    let t2 = run_preset(Preset::Table2, &base).unwrap();
    let labels: Vec<_> = SAMPLINGS.iter().map(|s| s.label().to_string()).collect();
    assert_eq!(t2.rows.iter().map(|r| r.keys.join("/")).collect::<Vec<_>>(), labels);
    assert_eq!(t2.reports.len(), SAMPLINGS.len());

    let t5 = run_preset(Preset::Table5, &base).unwrap();
    for f in FRACTIONS {
        let n = t5.reports.iter().find(|r| r.config.data_fraction == f).unwrap().counts.train_rows;
        assert!(t5.value(&f.to_string(), "aucpr").is_some(), "{f}");
        assert!(n >= 2, "{f}: {n} rows");
    }

    let fig = run_preset(Preset::Fig4, &base).unwrap();
    assert_eq!(fig.rows.len(), VARIANCES.len());
    assert_eq!(fig.value("0", "avg_l2"), Some(0.0));
    assert_eq!(fig.value("0", "avg_cos"), Some(1.0));
    let csv = fig.to_csv().unwrap();
    assert_eq!(csv.lines().next().unwrap(), "variance,aucpr,avg_l2,avg_cos");
    assert_eq!(csv.lines().count(), VARIANCES.len() + 1);
}

#[test]
fn configs_round_trip_through_json() {
    let mut cfg = small();
    cfg.setting = Setting::Vanilla;
    cfg.noise_var = 0.1;
    cfg.classifier = hyfl::models::ClassifierConfig::for_kind(ClassifierKind::Mlp);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);

    // Missing keys take their defaults.
    let partial = ExperimentConfig::from_json(r#"{"clients": 3, "setting": "centralized"}"#).unwrap();
    assert_eq!(partial.clients, 3);
    assert_eq!(partial.setting, Setting::Centralized);
    assert_eq!(partial.noise_var, ExperimentConfig::default().noise_var);

    assert!(ExperimentConfig::from_json(r#"{"clients": 0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"data_fraction": 1.5}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"noise_var": -1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"setting": "bogus"}"#).is_err());
}

#[test]
fn threshold_metrics_match_a_hand_count() {
    // Predicted positive at >= 0.5: tp = 2, fp = 1, fn = 1.
    let p = prf1(&[0.9, 0.6, 0.55, 0.2, 0.1], &[1, 1, 0, 1, 0], 0.5).unwrap();
    assert!((p.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((p.recall - 2.0 / 3.0).abs() < 1e-12);
    assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
    let none = prf1(&[0.1, 0.2], &[1, 0], 0.5).unwrap();
    assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
}

fn hyfl_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyfl"))
}

#[test]
fn cli_generates_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = hyfl_bin()
        .args(["--n-train", "400", "--seed", "3", "--out"])
        .arg(&data)
        .arg("gen-data")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ds = read_dataset(&data).unwrap();
    assert_eq!(ds.train.len(), 400);

    let run_dir = dir.path().join("run");
    let transcript = dir.path().join("frames.jsonl");
    let out = hyfl_bin()
        .args(["run", "--n-train", "1500", "--clients", "3", "--interval", "1", "--rounds", "2"])
        .args(["--classifier", "logreg", "--sampling", "reweight", "--route", "p2p", "--out"])
        .arg(&run_dir)
        .arg("--dump-transcript")
        .arg(&transcript)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: MetricsReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.config.classifier.kind, ClassifierKind::LogReg);
    assert_eq!(report.config.clients, 3);
    assert!(run_dir.join("metrics.json").exists());
    let lines = std::fs::read_to_string(&transcript).unwrap().lines().count();
    assert_eq!(lines, report.counts.frames);
}

#[test]
fn cli_rejects_bad_arguments() {
    for args in [
        &["run", "--classifier", "forest"][..],
        &["preset", "table9"],
        &["attack", "nope"],
        &["run", "--clients", "0"],
    ] {
        let out = hyfl_bin().args(args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
    }
}

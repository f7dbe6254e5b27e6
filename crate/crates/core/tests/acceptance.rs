//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4,12` restricts the run; `ACCEPTANCE_STRICT=1` makes
//! the known-failing criteria fatal as well.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use hyfl::data::generate;
use hyfl::harness::{
    aucpr, invert_update, join_locally, membership_on, run_preset, train_autoencoder_centrally, ExperimentConfig,
    InversionScenario, MembershipScenario, Preset, Session, Setting,
};
use hyfl::models::{Autoencoder, LinearLoss, LinearModel, Mlp};
use hyfl::privacy::{mask_update, unmask_sum, Opener, Sealer};
use hyfl::transport::{Frame, MsgType, RouteMode};
use hyfl::Matrix;

use common::*;

/// Criteria that miss at the default configuration; see the project notes.
const KNOWN_FAILING: &[u32] = &[9];
/// Wall-clock budget of each trend reproduction.
const TREND_BUDGET_SECS: f64 = 600.0;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> hyfl::Result<Check>;

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, Criterion); 13] = [
        (1, "federated degeneracy", c1_degeneracy),
        (2, "secure aggregation", c2_aggregation),
        (3, "gradient checks", c3_gradients),
        (4, "aucpr oracle", c4_aucpr),
        (5, "role isolation", c5_isolation),
        (6, "codec and aead", c6_codec),
        (7, "classifier ordering", c7_classifiers),
        (8, "noise trend", c8_noise),
        (9, "sampling trend", c9_sampling),
        (10, "communication frequency", c10_schedule),
        (11, "data size trend", c11_fraction),
        (12, "gradient inversion", c12_inversion),
        (13, "membership inference", c13_membership),
    ];
    let mut fatal = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let check = run().unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
        let known = KNOWN_FAILING.contains(&id);
        println!(
            "{} criterion {id} ({name}): {} [{:.1}s]{}",
            if check.pass { "PASS" } else { "FAIL" },
            check.detail,
            t.elapsed().as_secs_f64(),
            if !check.pass && known { " (known)" } else { "" }
        );
        if !check.pass && (strict || !known) {
            fatal += 1;
        }
    }
    if fatal > 0 {
        println!("{fatal} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn c1_degeneracy() -> hyfl::Result<Check> {
    let base = ExperimentConfig {
        clients: 1,
        noise_var: 0.0,
        ..Default::default()
    };
    let mut runs = Vec::new();
    for setting in [Setting::Centralized, Setting::Vanilla] {
        let cfg = ExperimentConfig {
            setting,
            ..base.clone()
        };
        let t = Instant::now();
        let mut s = Session::prepare(&cfg)?;
        let e = s.evaluate(&cfg.eval_spec())?;
        runs.push((s.autoencoder().flatten(), e, t.elapsed().as_secs_f64()));
    }
    let (ae_c, central, t_c) = &runs[0];
    let (ae_v, vanilla, t_v) = &runs[1];
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let same_ae = bits(ae_c) == bits(ae_v);
    let same_model = central.classifier == vanilla.classifier;
    let same_scores = bits(&central.scores) == bits(&vanilla.scores);
    let same_aucpr = central.report.aucpr.to_bits() == vanilla.report.aucpr.to_bits();
    let fast = t_c.max(*t_v) < 120.0;
    Ok(Check::new(
        same_ae && same_model && same_scores && same_aucpr && fast,
        format!(
            "encoder equal {same_ae}, classifier equal {same_model}, scores equal {same_scores}, \
             aucpr {:.4} vs {:.4}, runtime {t_c:.1}s / {t_v:.1}s",
            central.report.aucpr, vanilla.report.aucpr
        ),
    ))
}

fn c2_aggregation() -> hyfl::Result<Check> {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let m = r.random_range(2..=10u32);
        let dim = r.random_range(1..=64);
        let keys = clique_keys(m, trial);
        let params: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| r.random_range(-10.0..10.0)).collect())
            .collect();
        let ups = (0..m as usize)
            .map(|i| mask_update(&params[i], i as u32 + 1, &keys[i], trial))
            .collect::<hyfl::Result<Vec<_>>>()?;
        let sum = unmask_sum(&ups)?;
        for j in 0..dim {
            let plain = params.iter().map(|p| p[j]).sum::<f64>() / m as f64;
            worst = worst.max((sum[j] / m as f64 - plain).abs());
        }
    }
    // One client's masked words over fresh sessions, same plaintext each time.
    let params: Vec<f64> = (0..16).map(|j| j as f64 * 0.25 - 2.0).collect();
    let samples = (0..1000u64)
        .map(|t| {
            let keys = clique_keys(3, 10_000 + t);
            mask_update(&params, 1, &keys[0], t).map(|u| u.values)
        })
        .collect::<hyfl::Result<Vec<_>>>()?;
    let z = max_uniform_z(&samples);
    Ok(Check::new(
        worst <= 1e-5 && z <= 4.0,
        format!("max |masked − plain| {worst:.2e} over 100 trials, max coordinate z {z:.2} over 1000 trials"),
    ))
}

fn c3_gradients() -> hyfl::Result<Check> {
    const TOL: f64 = 1e-4;
    const H: f64 = 1e-6;
    let mut r = rng(3);
    let mut worst = [0.0f64; 4];

    for k in 0..50 {
        let (d, h, l) = (r.random_range(2..7), r.random_range(2..6), r.random_range(1..4));
        // Random biases as well as weights: zero biases behind a dead layer
        // would sit exactly on a ReLU kink.
        let mut ae = Autoencoder::new(d, h, l, k);
        let p: Vec<f64> = ae.flatten().iter().map(|_| r.random_range(-1.0..1.0)).collect();
        ae.load_flat(&p)?;
        let n = r.random_range(1..6);
        let x = random_matrix(&mut r, n, d, 1.5);
        let analytic = ae.gradient(&x);
        let numeric = central_diff(
            |p| {
                let mut m = ae.clone();
                m.load_flat(p).unwrap();
                m.loss(&x)
            },
            &ae.flatten(),
            H,
        );
        worst[0] = worst[0].max(rel_err(&analytic, &numeric));
    }

    for (slot, hinge) in [(1, false), (2, true)] {
        let mut done = 0;
        while done < 50 {
            let d = r.random_range(1..8);
            let n = r.random_range(1..10);
            let loss = if hinge {
                LinearLoss::Hinge {
                    l2: r.random_range(0.0..0.1),
                }
            } else {
                LinearLoss::Logistic
            };
            let mut model = LinearModel::zeros(d, loss);
            let p: Vec<f64> = (0..=d).map(|_| r.random_range(-1.0..1.0)).collect();
            model.set_params(&p)?;
            let x = random_matrix(&mut r, n, d, 2.0);
            let y: Vec<f64> = (0..n).map(|_| r.random_range(0..2) as f64).collect();
            let w: Option<Vec<f64>> = r.random_bool(0.5).then(|| (0..n).map(|_| r.random_range(0.1..3.0)).collect());
            // The hinge is not differentiable at margin 1; skip draws near it.
            if hinge && (0..n).any(|i| (1.0 - (2.0 * y[i] - 1.0) * model.margin(x.row(i))).abs() < 1e-3) {
                continue;
            }
            let (_, analytic) = model.loss_gradient(&x, &y, w.as_deref())?;
            let numeric = central_diff(
                |q| {
                    let mut m = model.clone();
                    m.set_params(q).unwrap();
                    m.loss_gradient(&x, &y, w.as_deref()).unwrap().0
                },
                &p,
                H,
            );
            worst[slot] = worst[slot].max(rel_err(&analytic, &numeric));
            done += 1;
        }
    }

    for k in 0..50 {
        let d = r.random_range(1..6);
        let hidden: Vec<usize> = (0..r.random_range(1..3)).map(|_| r.random_range(2..6)).collect();
        let mut mlp = Mlp::new(d, &hidden, 100 + k);
        let p: Vec<f64> = mlp.params().iter().map(|_| r.random_range(-1.0..1.0)).collect();
        mlp.set_params(&p)?;
        let n = r.random_range(1..8);
        let x = random_matrix(&mut r, n, d, 2.0);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0..2) as f64).collect();
        let (_, analytic) = mlp.loss_gradient(&x, &y, None)?;
        let numeric = central_diff(
            |q| {
                let mut m = mlp.clone();
                m.set_params(q).unwrap();
                m.loss_gradient(&x, &y, None).unwrap().0
            },
            &mlp.params(),
            H,
        );
        worst[3] = worst[3].max(rel_err(&analytic, &numeric));
    }

    Ok(Check::new(
        worst.iter().all(|&e| e <= TOL),
        format!(
            "max relative error autoencoder {:.1e}, logreg {:.1e}, svm {:.1e}, mlp {:.1e} (50 instances each)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn c4_aucpr() -> hyfl::Result<Check> {
    let mut r = rng(4);
    let mut cases = 0usize;
    let mut mismatches = 0usize;
    let mut worst: f64 = 0.0;
    for n in 2..=8usize {
        // Sorted points: a tie structure is a composition of n (bit b set =
        // points b and b+1 fall in different score groups).
        for cuts in 0u32..(1 << (n - 1)) {
            let mut ranks = vec![0usize; n];
            for b in 1..n {
                ranks[b] = ranks[b - 1] + (cuts >> (b - 1) & 1) as usize;
            }
            for labeling in 1u32..(1 << n) - 1 {
                // Arbitrary monotone values for the ranks, then shuffle the
                // points so input order is exercised too.
                let mut levels: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
                levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let mut pts: Vec<(f64, u8)> =
                    (0..n).map(|i| (levels[ranks[i]], (labeling >> i & 1) as u8)).collect();
                pts.shuffle(&mut r);
                let scores: Vec<f64> = pts.iter().map(|p| p.0).collect();
                let labels: Vec<u8> = pts.iter().map(|p| p.1).collect();
                let got = aucpr(&scores, &labels)?;
                let want = brute_aucpr(&scores, &labels);
                let gap = (got - want).abs();
                worst = worst.max(gap);
                if gap > 1e-12 {
                    mismatches += 1;
                }
                cases += 1;
            }
        }
    }
    Ok(Check::new(
        mismatches == 0 && cases >= 10_000,
        format!("{cases} cases, {mismatches} mismatches, max gap {worst:.1e}"),
    ))
}

fn c5_isolation() -> hyfl::Result<Check> {
    let mut parts = Vec::new();
    let mut clean = true;
    for route in [RouteMode::ServerRouted, RouteMode::P2p] {
        let cfg = ExperimentConfig {
            setting: Setting::Hyfl,
            route,
            ..Default::default()
        };
        let mut s = Session::prepare(&cfg)?;
        s.evaluate(&cfg.eval_spec())?;
        let report = s.audit().expect("federated session")?;
        clean &= report.is_clean();
        parts.push(format!(
            "{route}: {} frames, {} violations",
            report.frames_scanned,
            report.violations.len()
        ));
    }
    Ok(Check::new(clean, parts.join("; ")))
}

fn c6_codec() -> hyfl::Result<Check> {
    const TYPES: [MsgType; 9] = [
        MsgType::Register,
        MsgType::KeyExchange,
        MsgType::ModelUpdate,
        MsgType::GlobalModel,
        MsgType::EmbeddingQuery,
        MsgType::EmbeddingReply,
        MsgType::PredictRequest,
        MsgType::PredictReply,
        MsgType::Error,
    ];
    let mut r = rng(6);
    let mut frame_failures = 0;
    let mut decoded_random = 0;
    for i in 0..100_000 {
        if i % 2 == 0 {
            let mut payload = vec![0u8; r.random_range(0..128)];
            r.fill_bytes(&mut payload);
            let f = Frame::new(TYPES[r.random_range(0..TYPES.len())], payload)?;
            let bytes = f.encode();
            if Frame::decode(&bytes).ok().as_ref() != Some(&f) || bytes.len() != f.encoded_len() {
                frame_failures += 1;
            }
        } else {
            // Arbitrary bytes with a plausible header: whatever decodes must
            // re-encode to exactly the same bytes.
            let len = r.random_range(0..40usize);
            let mut bytes = Vec::with_capacity(5 + len);
            let declared = if r.random_bool(0.7) { len } else { r.random_range(0..48) };
            bytes.extend_from_slice(&(declared as u32).to_be_bytes());
            bytes.push(if r.random_bool(0.8) {
                TYPES[r.random_range(0..TYPES.len())].code()
            } else {
                r.random()
            });
            bytes.extend((0..len).map(|_| r.random::<u8>()));
            if let Ok(f) = Frame::decode(&bytes) {
                decoded_random += 1;
                if f.encode() != bytes {
                    frame_failures += 1;
                }
            }
        }
    }

    let mut aead_failures = 0;
    let mut rejected = 0;
    for i in 0..10_000 {
        let mut key = [0u8; 32];
        r.fill_bytes(&mut key);
        let mut plain = vec![0u8; r.random_range(0..96)];
        r.fill_bytes(&mut plain);
        let aad = format!("reply/{i}");
        let ct = Sealer::new(&key, "ac:1").seal(&plain, aad.as_bytes())?;
        if Opener::new(&key).open(&ct, aad.as_bytes()).ok().as_deref() != Some(&plain[..]) {
            aead_failures += 1;
        }
        let mut bad = ct.clone();
        let bit = r.random_range(0..bad.len() * 8);
        bad[bit / 8] ^= 1 << (bit % 8);
        if Opener::new(&key).open(&bad, aad.as_bytes()).is_err() {
            rejected += 1;
        }
    }
    Ok(Check::new(
        frame_failures == 0 && aead_failures == 0 && rejected == 10_000,
        format!(
            "frames: 100000 cases ({decoded_random} random inputs decoded), {frame_failures} failures; \
             aead: {aead_failures} round-trip failures, {rejected}/10000 mutations rejected"
        ),
    ))
}

fn timed_preset(preset: Preset) -> hyfl::Result<(hyfl::harness::PresetReport, f64)> {
    let t = Instant::now();
    let report = run_preset(preset, &ExperimentConfig::default())?;
    Ok((report, t.elapsed().as_secs_f64()))
}

fn c7_classifiers() -> hyfl::Result<Check> {
    let (rep, secs) = timed_preset(Preset::Table1)?;
    let a = |s: Setting, k: &str| rep.value(&format!("{s}/{k}"), "aucpr").expect("table1 cell");
    let mut ordered = true;
    let mut parts = Vec::new();
    for s in Setting::ALL {
        let v = [a(s, "gbdt"), a(s, "mlp"), a(s, "logreg"), a(s, "svm")];
        ordered &= v.windows(2).all(|w| w[0] > w[1]);
        parts.push(format!("{s} {:.3}>{:.3}>{:.3}>{:.3}", v[0], v[1], v[2], v[3]));
    }
    let gap = (a(Setting::Vanilla, "gbdt") - a(Setting::Centralized, "gbdt")).abs();
    Ok(Check::new(
        ordered && gap < 0.03 && secs < TREND_BUDGET_SECS,
        format!("{}; |vanilla − centralized| {gap:.4}", parts.join(", ")),
    ))
}

fn c8_noise() -> hyfl::Result<Check> {
    let (rep, secs) = timed_preset(Preset::Fig4)?;
    let col = |c: &str| -> Vec<f64> {
        hyfl::harness::VARIANCES
            .iter()
            .map(|v| rep.value(&v.to_string(), c).expect("fig4 cell"))
            .collect()
    };
    let (auc, l2, cos) = (col("aucpr"), col("avg_l2"), col("avg_cos"));
    // Variances: 0, 1e-4, 1e-3, 1e-2, 1e-1, 0.5.
    let trend = auc[5] < auc[3] && auc[3] <= auc[2] + 0.02;
    let cos_down = cos.windows(2).all(|w| w[1] < w[0]);
    let l2_up = l2.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Ok(Check::new(
        trend && cos_down && l2_up && secs < TREND_BUDGET_SECS,
        format!("aucpr [{}], avg_cos [{}], avg_l2 [{}]", fmt(&auc), fmt(&cos), fmt(&l2)),
    ))
}

fn c9_sampling() -> hyfl::Result<Check> {
    let (rep, secs) = timed_preset(Preset::Table2)?;
    let a = |l: &str| rep.value(l, "aucpr").expect("table2 cell");
    let rw = a("Reweight");
    let others = ["RandomUnder", "RandomOver", "SMOTE"].map(|l| (l, a(l)));
    let wins = others.iter().all(|(_, v)| rw > *v);
    Ok(Check::new(
        wins && secs < TREND_BUDGET_SECS,
        format!(
            "Reweight {rw:.4} vs {}",
            others.iter().map(|(l, v)| format!("{l} {v:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn c10_schedule() -> hyfl::Result<Check> {
    let (rep, secs) = timed_preset(Preset::Table3)?;
    let frequent = rep.value("I1-R50", "aucpr").expect("table3 cell");
    let once = rep.value("I50-R1", "aucpr").expect("table3 cell");
    Ok(Check::new(
        frequent >= once && secs < TREND_BUDGET_SECS,
        format!("I1-R50 {frequent:.4} vs I50-R1 {once:.4} at 100 clients"),
    ))
}

fn c11_fraction() -> hyfl::Result<Check> {
    let (rep, secs) = timed_preset(Preset::Table5)?;
    let v: Vec<f64> = ["1", "0.1", "0.01"]
        .iter()
        .map(|l| rep.value(l, "aucpr").expect("table5 cell"))
        .collect();
    Ok(Check::new(
        v[0] > v[1] && v[1] > v[2] && secs < TREND_BUDGET_SECS,
        format!("fraction 1.0 {:.4}, 0.1 {:.4}, 0.01 {:.4}", v[0], v[1], v[2]),
    ))
}

fn c12_inversion() -> hyfl::Result<Check> {
    let cfg = ExperimentConfig::default();
    let ds = generate(&cfg.data)?;
    let init = Autoencoder::from_config(&cfg.autoencoder, cfg.protocol().init_seed());
    let secret = ds
        .accounts
        .values()
        .find(|a| a.flag.is_high_risk())
        .expect("a high-risk account")
        .flag
        .encode();
    let clean = invert_update(&init, &secret, &InversionScenario::default())?;
    let noisy = invert_update(
        &init,
        &secret,
        &InversionScenario {
            noise_var: 0.1,
            ..Default::default()
        },
    )?;
    let obj = clean.metric("objective_cos").unwrap_or(f64::NAN);
    let c0 = clean.metric("input_cos").unwrap_or(f64::NAN);
    let c1 = noisy.metric("input_cos").unwrap_or(f64::NAN);
    Ok(Check::new(
        obj > 0.99 && c0 > 0.9 && c0 - c1 >= 0.2,
        format!("objective {obj:.4}, input cosine {c0:.4} clean vs {c1:.4} at variance 0.1"),
    ))
}

fn c13_membership() -> hyfl::Result<Check> {
    let cfg = ExperimentConfig::default();
    let ds = generate(&cfg.data)?;
    let ae = train_autoencoder_centrally(&ds, &cfg.protocol())?;
    let rows: Matrix = join_locally(&ds, &ae, &ds.train)?;
    let labels = ds.labels(&ds.train);
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for seed in 0..3 {
        for (noise_var, out) in [(0.0, &mut clean), (0.1, &mut noisy)] {
            let sc = MembershipScenario {
                noise_var,
                seed,
                ..Default::default()
            };
            out.push(membership_on(&rows, &labels, &sc)?.metric("auc").unwrap_or(f64::NAN));
        }
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let (m0, m1) = (median(clean.clone()), median(noisy.clone()));
    Ok(Check::new(
        m0 > 0.6 && m1 < m0,
        format!(
            "median attack AUC {m0:.3} clean [{}] vs {m1:.3} at variance 0.1 [{}]",
            fmt(&clean),
            fmt(&noisy)
        ),
    ))
}

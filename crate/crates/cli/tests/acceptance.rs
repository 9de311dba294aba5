//! Acceptance report: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use problabel::data::one_hot;
use problabel::experiments::{
    run_accuracy_vs_n, run_distillation_experiment, run_imbalance_vs_ece, DistillConfig,
    DistillStrategy, MixtureSpec, Strategy, SweepConfig, SweepResult,
};
use problabel::metrics::{expected_calibration_error, hosmer_lemeshow, roc_auc};
use problabel::prob_label::{bayes_posterior, smooth_labels};
use problabel::trainers::{
    train_from, train_two_stage, Activation, LabelStrategy, LayerSpec, Network, NetworkSpec,
    Parameters, TrainConfig,
};
use problabel::{ClassDistribution, Dataset, FeatureVector, InputShape, Rng, Seed, Standardizer};

/// Anchor parameters and penalty weight.
type Anchor<'a> = Option<(&'a Parameters, f64)>;

const SEED: u64 = 2024;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn mean_at(r: &SweepResult, s: Strategy, i: usize) -> f64 {
    r.series(s).expect("strategy in sweep").mean[i]
}

fn criterion1() -> Outcome {
    let t = Instant::now();
    let cfg = SweepConfig {
        strategies: vec![Strategy::Hard, Strategy::CorrectProb],
        ..SweepConfig::default()
    };
    let ns = [2, 4, 6, 8, 10];
    let r = run_accuracy_vs_n(&MixtureSpec::experiment1(), &ns, &cfg, Seed(SEED)).map_err(err)?;
    let elapsed = t.elapsed();
    let adv: Vec<f64> = (0..ns.len())
        .map(|i| mean_at(&r, Strategy::CorrectProb, i) - mean_at(&r, Strategy::Hard, i))
        .collect();
    let min = adv.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = adv[0] >= 0.03 && min >= 0.0 && elapsed < Duration::from_secs(120);
    let per_n: Vec<String> = ns
        .iter()
        .zip(&adv)
        .map(|(n, a)| format!("n={n} {:+.2}", 100.0 * a))
        .collect();
    Ok((
        ok,
        format!(
            "prob-minus-hard accuracy points: {} (need n=2 >= +3.00, all >= 0); {}",
            per_n.join(", "),
            secs(elapsed)
        ),
    ))
}

fn sweep60() -> Result<SweepResult, String> {
    run_accuracy_vs_n(
        &MixtureSpec::experiment1(),
        &[60],
        &SweepConfig::default(),
        Seed(SEED),
    )
    .map_err(err)
}

fn criterion2(r: &SweepResult) -> Outcome {
    let hard = mean_at(r, Strategy::Hard, 0);
    let prob = mean_at(r, Strategy::CorrectProb, 0);
    Ok((
        (hard - prob).abs() <= 0.02,
        format!("n=60 hard {hard:.4}, correct-prob {prob:.4} (need |diff| <= 0.02)"),
    ))
}

fn criterion3(r: &SweepResult) -> Outcome {
    let hard = mean_at(r, Strategy::Hard, 0);
    let wrong = mean_at(r, Strategy::IncorrectProb, 0);
    let reg = mean_at(r, Strategy::Regularized, 0);
    Ok((
        wrong < hard && (reg - hard).abs() <= 0.02,
        format!("n=60 hard {hard:.4}, incorrect-prob {wrong:.4} (need < hard), regularized {reg:.4} (need within 0.02)"),
    ))
}

fn criterion4() -> Outcome {
    let cfg = SweepConfig {
        strategies: vec![Strategy::Hard, Strategy::CorrectProb],
        ..SweepConfig::default()
    };
    let minority: Vec<usize> = (1..=10).collect();
    let r = run_imbalance_vs_ece(&MixtureSpec::experiment1(), 10, &minority, &cfg, Seed(SEED))
        .map_err(err)?;
    let hard = &r.series(Strategy::Hard).expect("hard").mean;
    let prob = &r.series(Strategy::CorrectProb).expect("prob").mean;
    let wins = hard.iter().zip(prob).filter(|(h, p)| p < h).count();
    let worst = hard
        .iter()
        .zip(prob)
        .map(|(h, p)| h - p)
        .fold(f64::INFINITY, f64::min);
    Ok((
        wins == hard.len(),
        format!(
            "ECE(correct-prob) < ECE(hard) at {wins}/{} ratios; smallest margin {worst:.4}",
            hard.len()
        ),
    ))
}

fn criterion5() -> Outcome {
    let t = Instant::now();
    let r = run_distillation_experiment(&DistillConfig::default(), Seed(SEED)).map_err(err)?;
    let elapsed = t.elapsed();
    let hard = &r.arm(DistillStrategy::Hard).report;
    let prob = &r.arm(DistillStrategy::Prob).report;
    let reg = &r.arm(DistillStrategy::Reg).report;
    let ok = prob.ece < hard.ece
        && prob.hl_statistic < hard.hl_statistic
        && reg.accuracy >= hard.accuracy - 0.01
        && elapsed < Duration::from_secs(600);
    Ok((
        ok,
        format!(
            "ECE prob {:.4} vs hard {:.4}; HL prob {:.3} vs hard {:.3}; acc reg {:.4} vs hard {:.4}; lambda {}; {}",
            prob.ece,
            hard.ece,
            prob.hl_statistic,
            hard.hl_statistic,
            reg.accuracy,
            hard.accuracy,
            r.lambda.lambda,
            secs(elapsed)
        ),
    ))
}

/// Random small network covering one of four layer mixes.
fn random_network(i: usize, rng: &mut Rng) -> NetworkSpec {
    let act = |kind| LayerSpec::Activation { kind };
    let hidden = |rng: &mut Rng| {
        if rng.bernoulli(0.5) {
            Activation::Relu
        } else {
            Activation::Sigmoid
        }
    };
    let small = |rng: &mut Rng, lo: usize| lo + rng.below(3);
    match i % 4 {
        0 => NetworkSpec {
            input: InputShape::Flat { dim: small(rng, 2) },
            layers: vec![
                LayerSpec::Dense {
                    units: small(rng, 2),
                },
                act(hidden(rng)),
                LayerSpec::Dense { units: 1 },
                act(Activation::Sigmoid),
            ],
        },
        1 => NetworkSpec {
            input: InputShape::Flat { dim: small(rng, 2) },
            layers: vec![
                LayerSpec::Dense {
                    units: small(rng, 2),
                },
                act(hidden(rng)),
                LayerSpec::Dense {
                    units: small(rng, 2),
                },
                act(Activation::Softmax),
            ],
        },
        2 => {
            let side = 2 * small(rng, 2);
            NetworkSpec {
                input: InputShape::Image {
                    height: side,
                    width: side + 2,
                },
                layers: vec![
                    LayerSpec::Conv2d {
                        filters: small(rng, 1),
                    },
                    act(Activation::Relu),
                    LayerSpec::MaxPool,
                    LayerSpec::Conv2d {
                        filters: small(rng, 1),
                    },
                    act(hidden(rng)),
                    LayerSpec::Flatten,
                    LayerSpec::Dense { units: 1 },
                    act(Activation::Sigmoid),
                ],
            }
        }
        _ => {
            let side = 2 * small(rng, 2);
            NetworkSpec {
                input: InputShape::Image {
                    height: side,
                    width: side,
                },
                layers: vec![
                    LayerSpec::Conv2d {
                        filters: small(rng, 1),
                    },
                    act(hidden(rng)),
                    LayerSpec::MaxPool,
                    LayerSpec::Flatten,
                    LayerSpec::Dense {
                        units: small(rng, 2),
                    },
                    act(Activation::Relu),
                    LayerSpec::Dense {
                        units: small(rng, 2),
                    },
                    act(Activation::Softmax),
                ],
            }
        }
    }
}

/// Mean cross-entropy of the forward pass plus the anchor penalty, computed
/// directly from per-sample probabilities.
fn objective(
    net: &Network,
    params: &Parameters,
    inputs: &[f64],
    targets: &[f64],
    anchor: Anchor<'_>,
) -> f64 {
    let len = net.input_len();
    let k = net.num_classes();
    let batch = inputs.len() / len;
    let mut ce = 0.0;
    for b in 0..batch {
        let p = net
            .forward(params, &inputs[b * len..(b + 1) * len])
            .expect("forward");
        for c in 0..k {
            ce -= targets[b * k + c] * p.get(c).ln();
        }
    }
    let mut loss = ce / batch as f64;
    if let Some((a, lambda)) = anchor {
        loss += lambda
            * params
                .values
                .iter()
                .zip(&a.values)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
    }
    loss
}

fn criterion6() -> Outcome {
    const EPS: f64 = 1e-5;
    let mut rng = Seed(SEED).derive(&[6]).rng();
    let networks = 24;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut kinds = std::collections::BTreeSet::new();
    for i in 0..networks {
        let spec = random_network(i, &mut rng);
        for l in &spec.layers {
            kinds.insert(
                format!("{l:?}")
                    .split([' ', '{'])
                    .next()
                    .unwrap_or_default()
                    .to_string(),
            );
            if let LayerSpec::Activation { kind } = l {
                kinds.insert(format!("{kind:?}"));
            }
        }
        let net = Network::new(spec).map_err(err)?;
        let mut params = net.init_params(Seed(rng.next_u64()));
        for v in &mut params.values {
            *v += 0.1 * rng.normal();
        }
        let batch = 3;
        let k = net.num_classes();
        let inputs: Vec<f64> = (0..batch * net.input_len())
            .map(|_| rng.uniform_range(-1.0, 1.0))
            .collect();
        let hard: Vec<f64> = (0..batch)
            .flat_map(|_| one_hot(rng.below(k), k).expect("one-hot").into_vec())
            .collect();
        let soft: Vec<f64> = (0..batch)
            .flat_map(|_| {
                let w: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.05, 1.0)).collect();
                ClassDistribution::from_weights(w)
                    .expect("weights")
                    .into_vec()
            })
            .collect();
        let mut anchor = params.clone();
        for v in &mut anchor.values {
            *v += 0.3 * rng.normal();
        }
        let lambda = rng.uniform_range(0.1, 2.0);
        let regimes: [(&[f64], Anchor); 3] = [
            (&hard, None),
            (&soft, None),
            (&hard, Some((&anchor, lambda))),
        ];
        for (targets, anc) in regimes {
            let analytic = net
                .loss_and_gradient(&params, &inputs, targets, anc)
                .map_err(err)?
                .values;
            for (j, &a) in analytic.iter().enumerate() {
                let mut plus = params.clone();
                plus.values[j] += EPS;
                let mut minus = params.clone();
                minus.values[j] -= EPS;
                let numeric = (objective(&net, &plus, &inputs, targets, anc)
                    - objective(&net, &minus, &inputs, targets, anc))
                    / (2.0 * EPS);
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((a - numeric).abs() / denom);
                checked += 1;
            }
        }
    }
    let layers: Vec<String> = kinds.into_iter().collect();
    Ok((
        worst <= 1e-4 && networks >= 20,
        format!(
            "{networks} networks x 3 loss regimes, {checked} partials, layers {{{}}}; max relative error {worst:.2e} (need <= 1e-4)",
            layers.join(", ")
        ),
    ))
}

fn experiment1_train_data(n: usize, seed: Seed) -> Result<Dataset, String> {
    let spec = MixtureSpec::experiment1();
    let model = spec.model().map_err(err)?;
    let raw = problabel::experiments::sample_mixture(&spec, &[n / 2, n / 2], seed).map_err(err)?;
    let soft = raw
        .features()
        .expect("features")
        .iter()
        .map(|z| model.posterior(z))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let scaler = Standardizer::fit_dataset(&raw).map_err(err)?;
    scaler
        .apply(&raw)
        .map_err(err)?
        .with_soft_labels(soft)
        .map_err(err)
}

fn criterion7() -> Outcome {
    let data = experiment1_train_data(60, Seed(SEED).derive(&[7]))?;
    let spec = NetworkSpec::logistic(2);
    let cfg = TrainConfig {
        init: problabel::trainers::Initialization::GlorotUniform,
        ..TrainConfig::mixture_logistic()
    }
    .with_seed(Seed(SEED).derive(&[7, 1]));
    let cfg = TrainConfig {
        batch_size: 8,
        ..cfg
    };

    let zero = train_two_stage(&spec, &data, &cfg.with_lambda(0.0)).map_err(err)?;
    let fine_tune = train_from(
        &spec,
        &data,
        &cfg.with_strategy(LabelStrategy::Hard),
        zero.theta_p.params.clone(),
        None,
    )
    .map_err(err)?;
    let identical = zero
        .theta_final
        .params
        .values
        .iter()
        .zip(&fine_tune.params.values)
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && zero.theta_final.loss_trace == fine_tune.loss_trace;

    let pinned = train_two_stage(&spec, &data, &cfg.with_lambda(1e8)).map_err(err)?;
    let drift = pinned
        .theta_final
        .params
        .values
        .iter()
        .zip(&pinned.theta_p.params.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let moved = zero
        .theta_final
        .params
        .values
        .iter()
        .zip(&zero.theta_p.params.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((
        identical && drift <= 1e-3,
        format!(
            "lambda=0 stage 2 bit-identical to hard fine-tuning: {identical}; lambda=1e8 max |theta - theta_p| = {drift:.2e} (need <= 1e-3; lambda=0 moves {moved:.3})"
        ),
    ))
}

fn gaussian_density(z: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let (dx, dy) = (z[0] - mean[0], z[1] - mean[1]);
    let q = (cov[1][1] * dx * dx - (cov[0][1] + cov[1][0]) * dx * dy + cov[0][0] * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

fn criterion8() -> Outcome {
    let model = MixtureSpec::experiment1().model().map_err(err)?;
    let z = [5.0, 3.0];
    let post =
        bayes_posterior(&model, &FeatureVector::new(z.to_vec()).map_err(err)?).map_err(err)?;
    let f0 = gaussian_density(z, [5.0, 3.0], [[1.0, 0.5], [0.5, 1.0]]);
    let f1 = gaussian_density(z, [4.0, 4.0], [[1.0, 0.7], [0.7, 1.0]]);
    let oracle = [f0 / (f0 + f1), f1 / (f0 + f1)];
    let rel = (0..2)
        .map(|k| (post.distribution.get(k) - oracle[k]).abs() / oracle[k])
        .fold(0.0, f64::max);
    Ok((
        rel <= 1e-10 && !post.uniform_fallback,
        format!(
            "posterior [{:.12}, {:.12}] vs density-ratio oracle [{:.12}, {:.12}]; max relative error {rel:.1e} (need <= 1e-10)",
            post.distribution.get(0),
            post.distribution.get(1),
            oracle[0],
            oracle[1]
        ),
    ))
}

fn criterion9() -> Outcome {
    let smooth = smooth_labels(&one_hot(1, 2).map_err(err)?, 0.1).map_err(err)?;
    let smooth_ok = smooth.probs() == [0.1, 0.9];

    let mut labels = vec![0usize; 10];
    labels[..6].fill(1);
    let hl = hosmer_lemeshow(&[0.3; 10], &labels, 1).map_err(err)?;
    let hl_ok = (hl - 9.0 / 2.1).abs() <= 1e-12;

    let auc = roc_auc(&[0.9, 0.7, 0.7, 0.1], &[1, 1, 0, 0]).map_err(err)?;
    let auc_ok = auc == 0.875;

    let half: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let ece = expected_calibration_error(&[0.9; 10], &half, 10).map_err(err)?;
    let ece_ok = (ece - 0.4).abs() <= 1e-12;
    Ok((
        smooth_ok && hl_ok && auc_ok && ece_ok,
        format!(
            "smooth {:?} ({smooth_ok}); HL {hl} vs 9/2.1 ({hl_ok}); AUC {auc} ({auc_ok}); ECE {ece} ({ece_ok})",
            smooth.probs()
        ),
    ))
}

fn criterion10() -> Outcome {
    let spec = MixtureSpec::experiment1();
    let model = spec.model().map_err(err)?;
    let trials = 100;
    let n = 100_000;
    let mut good = 0;
    let mut worst_ece = 0.0f64;
    let mut hl_over = 0;
    for t in 0..trials {
        let mut rng = Seed(SEED).derive(&[10, t]).rng();
        let priors = model.priors().probs().to_vec();
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = usize::from(rng.uniform() >= priors[0]);
            let z = FeatureVector::new(model.sample_class(y, &mut rng)).map_err(err)?;
            scores.push(model.posterior(&z).map_err(err)?.get(1));
            labels.push(y);
        }
        let ece = expected_calibration_error(&scores, &labels, 10).map_err(err)?;
        let hl = hosmer_lemeshow(&scores, &labels, 10).map_err(err)?;
        worst_ece = worst_ece.max(ece);
        if hl >= 15.51 {
            hl_over += 1;
        }
        if ece <= 0.03 && hl < 15.51 {
            good += 1;
        }
    }
    Ok((
        good >= 90,
        format!(
            "{good}/{trials} trials with ECE <= 0.03 and HL < 15.51 (need >= 90); max ECE {worst_ece:.4}, HL over critical value in {hl_over}"
        ),
    ))
}

fn cli(bin: &str, args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(bin)
        .args(args)
        .arg("--quiet")
        .current_dir(cwd)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "`problabel {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<String>, String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(err)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    Ok(names)
}

fn criterion11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_problabel");
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path();
    std::fs::write(
        root.join("e1.json"),
        r#"{"n_values": [2, 4, 10, 20], "imbalance_minority": [2, 5, 10]}"#,
    )
    .map_err(err)?;
    std::fs::write(
        root.join("distill.json"),
        r#"{"distill": {"n": 60, "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.05}, "lambda_grid": [0, 1], "cv_folds": 2}}"#,
    )
    .map_err(err)?;
    let mut rng = Seed(SEED).derive(&[11]).rng();
    let mut scores = String::from("score,label\n");
    for _ in 0..200 {
        let s = rng.uniform();
        scores.push_str(&format!("{s},{}\n", usize::from(rng.uniform() < s)));
    }
    std::fs::write(root.join("scores.csv"), scores).map_err(err)?;

    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "e1",
            vec![
                "experiment1",
                "--config",
                "e1.json",
                "--reps",
                "3",
                "--out",
                "e1",
            ],
        ),
        (
            "distill",
            vec!["distill", "--config", "distill.json", "--out", "distill"],
        ),
        (
            "evaluate",
            vec!["evaluate", "--scores", "scores.csv", "--out", "evaluate"],
        ),
        (
            "boundary",
            vec![
                "boundary",
                "--model",
                "e1/model_hard.json",
                "--data",
                "e1/example_data.csv",
                "--resolution",
                "21",
                "--out",
                "boundary",
            ],
        ),
        (
            "cv",
            vec![
                "cv-lambda",
                "--data",
                "e1/example_data.csv",
                "--folds",
                "2",
                "--out",
                "cv",
            ],
        ),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (dir, args) in &runs {
        cli(bin, args, root)?;
        let again = format!("{dir}-rerun");
        cli(
            bin,
            &["rerun", &format!("{dir}/manifest.json"), "--out", &again],
            root,
        )?;
        let first = csv_files(&root.join(dir))?;
        if first.is_empty() || first != csv_files(&root.join(&again))? {
            mismatches.push(format!("{dir}: file sets differ"));
            continue;
        }
        for name in first {
            let a = std::fs::read(root.join(dir).join(&name)).map_err(err)?;
            let b = std::fs::read(root.join(&again).join(&name)).map_err(err)?;
            compared += 1;
            if a != b {
                mismatches.push(format!("{dir}/{name}"));
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        format!(
            "{} commands rerun from manifests, {compared} CSV files compared, mismatches: {}",
            runs.len(),
            if mismatches.is_empty() {
                "none".to_string()
            } else {
                mismatches.join(", ")
            }
        ),
    ))
}

fn main() {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |n: u32, name: &str, outcome: Outcome| {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} | {name} | {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    };
    report(1, "experiment-1 small-n advantage", criterion1());
    match sweep60() {
        Ok(r) => {
            report(2, "experiment-1 convergence at n=60", criterion2(&r));
            report(3, "misleading-label recovery", criterion3(&r));
        }
        Err(e) => {
            report(2, "experiment-1 convergence at n=60", Err(e.clone()));
            report(3, "misleading-label recovery", Err(e));
        }
    }
    report(4, "imbalance calibration", criterion4());
    report(5, "synthetic-image distillation", criterion5());
    report(6, "gradient oracle", criterion6());
    report(7, "two-stage lambda limits", criterion7());
    report(8, "Bayes posterior oracle", criterion8());
    report(9, "metric unit contracts", criterion9());
    report(10, "oracle calibration statistics", criterion10());
    report(11, "CLI rerun determinism", criterion11());
    println!(
        "acceptance: {}/11 criteria passed in {}",
        11 - failed,
        secs(started.elapsed())
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

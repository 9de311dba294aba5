use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use problabel::data::InputShape;
use problabel::experiments::{
    fit_example_models, run_accuracy_vs_n, run_distillation_experiment, run_imbalance_vs_ece,
    SweepConfig,
};
use problabel::io::{read_dataset_csv, read_scores_csv, write_dataset_csv};
use problabel::metrics::{
    decision_boundary_grid, BoundaryGrid, MetricsReport, ModelScorer, ReliabilityRow, Scorer,
};
use problabel::plot::{boundary_plot, reliability_plot};
use problabel::trainers::{
    cross_validate_lambda, train_two_stage, Activation, LayerSpec, NetworkSpec, TrainedModel,
};
use problabel::{Dataset, Seed, Standardizer};

use crate::config::{
    BoundaryConfig, CvLambdaConfig, DistillRunConfig, EvaluateConfig, Experiment1Config, GridConfig,
};
use crate::CliError;

type CmdResult<T> = std::result::Result<T, CliError>;

fn usage<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Usage(e.into())
}

fn compute<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Compute(e.into())
}

/// Output directory that records the name of every file written to it.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    quiet: bool,
}

impl Output {
    pub fn create(dir: &Path, quiet: bool) -> CmdResult<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))
            .map_err(compute)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            quiet,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> CmdResult<()> {
        let path = self.path(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(compute)
    }

    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Makes a relative path absolute against the working directory, so a
/// manifest stays valid when rerun from elsewhere.
pub fn absolute(path: &Path) -> anyhow::Result<PathBuf> {
    if path.is_absolute() {
        Ok(path.to_path_buf())
    } else {
        Ok(std::env::current_dir()?.join(path))
    }
}

fn write_boundary(
    out: &mut Output,
    stem: &str,
    title: &str,
    model: TrainedModel,
    grid: &GridConfig,
    points: &[(f64, f64, usize)],
) -> CmdResult<()> {
    let scorer = ModelScorer::new(model).map_err(usage)?;
    if scorer.input_dim() != 2 {
        return Err(usage(anyhow!(
            "decision boundaries need a 2-D model, got {} inputs",
            scorer.input_dim()
        )));
    }
    let g: BoundaryGrid = decision_boundary_grid(
        &scorer,
        (grid.x_range[0], grid.x_range[1]),
        (grid.y_range[0], grid.y_range[1]),
        grid.resolution,
    )
    .map_err(compute)?;
    out.write(&format!("{stem}.csv"), &g.to_csv())?;
    out.write(&format!("{stem}.svg"), &boundary_plot(title, &g, points))
}

fn points_2d(data: &Dataset) -> anyhow::Result<Vec<(f64, f64, usize)>> {
    let feats = data
        .features()
        .ok_or_else(|| anyhow!("scatter data must hold feature vectors"))?;
    feats
        .iter()
        .zip(data.hard_labels())
        .map(|(f, &y)| match f.values() {
            [a, b] => Ok((*a, *b, y)),
            v => Err(anyhow!(
                "scatter data must be 2-D, got {} features",
                v.len()
            )),
        })
        .collect()
}

pub fn experiment1(cfg: &Experiment1Config, out: &mut Output) -> CmdResult<()> {
    let seed = Seed(cfg.seed);
    out.progress(&format!(
        "experiment1: accuracy vs n ({} sizes x {} reps)",
        cfg.n_values.len(),
        cfg.sweep.reps
    ));
    let acc = run_accuracy_vs_n(&cfg.mixture, &cfg.n_values, &cfg.sweep, seed).map_err(compute)?;
    out.write("accuracy_vs_n.csv", &acc.to_csv())?;
    out.write(
        "accuracy_vs_n.svg",
        &acc.to_svg("Test accuracy vs training size"),
    )?;

    out.progress(&format!(
        "experiment1: ECE vs imbalance ({} ratios x {} reps)",
        cfg.imbalance_minority.len(),
        cfg.sweep.reps
    ));
    let imb_cfg = SweepConfig {
        strategies: cfg.imbalance_strategies.clone(),
        ..cfg.sweep.clone()
    };
    let imb = run_imbalance_vs_ece(
        &cfg.mixture,
        cfg.imbalance_majority,
        &cfg.imbalance_minority,
        &imb_cfg,
        seed,
    )
    .map_err(compute)?;
    out.write("ece_vs_imbalance.csv", &imb.to_csv())?;
    out.write(
        "ece_vs_imbalance.svg",
        &imb.to_svg("Test ECE vs class imbalance"),
    )?;

    out.progress(&format!(
        "experiment1: example boundaries (n = {})",
        cfg.example_n
    ));
    let ex = fit_example_models(&cfg.mixture, cfg.example_n, &cfg.sweep, seed).map_err(compute)?;
    let data_path = out.path("example_data.csv");
    write_dataset_csv(&ex.data, &data_path).map_err(compute)?;
    let points = points_2d(&ex.data).map_err(compute)?;
    for (strategy, model) in ex.models {
        let name = strategy.name();
        let path = out.path(&format!("model_{name}.json"));
        model.save(&path).map_err(compute)?;
        let title = format!("Decision boundary ({name})");
        write_boundary(
            out,
            &format!("boundary_{name}"),
            &title,
            model,
            &cfg.boundary,
            &points,
        )?;
    }
    Ok(())
}

pub fn distill(cfg: &DistillRunConfig, out: &mut Output) -> CmdResult<String> {
    out.progress(&format!(
        "distill: {} images, {} epochs per network, {} lambda candidates x {} folds",
        cfg.distill.n,
        cfg.distill.train.epochs,
        cfg.distill.lambda_grid.len(),
        cfg.distill.cv_folds
    ));
    let r = run_distillation_experiment(&cfg.distill, Seed(cfg.seed)).map_err(compute)?;
    out.write("metrics.csv", &r.table_csv())?;
    out.write("metrics.txt", &r.table_text())?;
    out.write(
        "teacher.json",
        &(serde_json::to_string_pretty(&r.teacher).map_err(compute)? + "\n"),
    )?;
    out.write("teacher_metrics.csv", &r.teacher_report.to_csv())?;

    let mut cv = String::from("lambda,mean_accuracy\n");
    for (l, a) in r.lambda.candidates.iter().zip(&r.lambda.mean_accuracy) {
        cv.push_str(&format!("{l},{a}\n"));
    }
    out.write("lambda_cv.csv", &cv)?;

    let spec = cfg.distill.network();
    let mut curves = vec![(
        "teacher".to_string(),
        r.teacher_report.reliability_rows.clone(),
    )];
    for arm in &r.arms {
        let name = arm.strategy.name();
        let model =
            TrainedModel::new(spec.clone(), arm.training.params.clone(), None).map_err(compute)?;
        out.write(
            &format!("model_{name}.json"),
            &model.to_json().map_err(compute)?,
        )?;
        out.write(&format!("loss_{name}.csv"), &arm.training.loss_trace_csv())?;
        out.write(
            &format!("reliability_{name}.csv"),
            &ReliabilityRow::to_csv_rows(&arm.report.reliability_rows),
        )?;
        curves.push((name.to_string(), arm.report.reliability_rows.clone()));
    }
    out.write(
        "reliability.svg",
        &reliability_plot("Holdout reliability", &curves),
    )?;
    Ok(format!(
        "selected lambda = {}\n{}",
        r.lambda.lambda,
        r.table_text()
    ))
}

pub fn evaluate(cfg: &EvaluateConfig, out: &mut Output) -> CmdResult<String> {
    let path = cfg.scores.as_deref().expect("validated");
    let (scores, labels) = read_scores_csv(path).map_err(usage)?;
    let r = MetricsReport::compute_with(&scores, &labels, cfg.bins, cfg.groups).map_err(compute)?;
    if r.auc.is_none() {
        out.progress("warning: AUC is undefined because only one class is present");
    }
    out.write("metrics.csv", &r.to_csv())?;
    out.write("metrics.json", &(r.to_json().map_err(compute)? + "\n"))?;
    out.write(
        "reliability.csv",
        &ReliabilityRow::to_csv_rows(&r.reliability_rows),
    )?;
    out.write(
        "reliability.svg",
        &reliability_plot(
            "Reliability",
            &[("scores".to_string(), r.reliability_rows.clone())],
        ),
    )?;
    let auc = r.auc.map_or("undefined".to_string(), |a| format!("{a:.6}"));
    Ok(format!(
        "n        {}\naccuracy {:.6}\nauc      {}\nece      {:.6}\nhl       {:.6}\n",
        r.n, r.accuracy, auc, r.ece, r.hl_statistic
    ))
}

pub fn boundary(cfg: &BoundaryConfig, out: &mut Output) -> CmdResult<()> {
    let model_path = cfg.model.as_deref().expect("validated");
    let model = TrainedModel::load(model_path).map_err(usage)?;
    let points = match &cfg.data {
        Some(p) => points_2d(&read_dataset_csv(p).map_err(usage)?).map_err(usage)?,
        None => Vec::new(),
    };
    write_boundary(
        out,
        "boundary",
        "Decision boundary",
        model,
        &cfg.grid,
        &points,
    )
}

fn default_network(data: &Dataset) -> anyhow::Result<NetworkSpec> {
    let k = data.num_classes();
    Ok(
        match data.input_shape().ok_or_else(|| anyhow!("empty dataset"))? {
            InputShape::Flat { dim } if k == 2 => NetworkSpec::logistic(dim),
            InputShape::Flat { dim } => NetworkSpec {
                input: InputShape::Flat { dim },
                layers: vec![
                    LayerSpec::Dense { units: k },
                    LayerSpec::Activation {
                        kind: Activation::Softmax,
                    },
                ],
            },
            InputShape::Image { height, width } if k == 2 => {
                NetworkSpec::reduced_cnn(height, width)
            }
            InputShape::Image { .. } => {
                return Err(anyhow!("image datasets need a \"network\" for {k} classes"))
            }
        },
    )
}

pub fn cv_lambda(cfg: &CvLambdaConfig, out: &mut Output) -> CmdResult<String> {
    let path = cfg.data.as_deref().expect("validated");
    let raw = read_dataset_csv(path).map_err(usage)?;
    if raw.soft_labels().is_none() {
        return Err(usage(anyhow!(
            "{} has no soft-label columns p0..",
            path.display()
        )));
    }
    let spec = match &cfg.network {
        Some(s) => s.clone(),
        None => default_network(&raw).map_err(usage)?,
    };
    let (data, standardizer) = if cfg.standardize && raw.features().is_some() {
        let s = Standardizer::fit_dataset(&raw).map_err(compute)?;
        (s.apply(&raw).map_err(compute)?, Some(s))
    } else {
        (raw, None)
    };
    let base = cfg.train.with_seed(Seed(cfg.seed));
    out.progress(&format!(
        "cv-lambda: {} candidates x {} folds on {} instances",
        cfg.lambda_grid.len(),
        cfg.folds,
        data.len()
    ));
    let sel =
        cross_validate_lambda(&spec, &data, &cfg.lambda_grid, cfg.folds, &base).map_err(compute)?;
    let fit = train_two_stage(&spec, &data, &base.with_lambda(sel.lambda)).map_err(compute)?;

    let mut csv = String::from("lambda,mean_accuracy\n");
    for (l, a) in sel.candidates.iter().zip(&sel.mean_accuracy) {
        csv.push_str(&format!("{l},{a}\n"));
    }
    out.write("cv_lambda.csv", &csv)?;
    let model =
        TrainedModel::new(spec, fit.theta_final.params.clone(), standardizer).map_err(compute)?;
    out.write("model.json", &model.to_json().map_err(compute)?)?;
    out.write("loss_stage1.csv", &fit.theta_p.loss_trace_csv())?;
    out.write("loss_stage2.csv", &fit.theta_final.loss_trace_csv())?;
    Ok(format!("selected lambda = {}\n", sel.lambda))
}

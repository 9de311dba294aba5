//! Command-line driver: resolves a per-command config (JSON file, then flag
//! overrides), runs it, and writes outputs plus a manifest that `rerun`
//! replays exactly.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::de::DeserializeOwned;

use args::{Command, GlobalArgs};
use commands::{absolute, Output};
use config::{BoundaryConfig, CvLambdaConfig, DistillRunConfig, EvaluateConfig, Experiment1Config};
use manifest::Manifest;

pub const DEFAULT_OUT: &str = "problabel-out";

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files: exit 2.
    Usage(anyhow::Error),
    /// Failure while computing or writing results: exit 1.
    Compute(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Compute(e) => e,
        }
    }
}

/// A fully resolved, validated run.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Experiment1(Experiment1Config),
    Distill(DistillRunConfig),
    Evaluate(EvaluateConfig),
    Boundary(BoundaryConfig),
    CvLambda(CvLambdaConfig),
}

impl Plan {
    pub fn name(&self) -> &'static str {
        match self {
            Plan::Experiment1(_) => "experiment1",
            Plan::Distill(_) => "distill",
            Plan::Evaluate(_) => "evaluate",
            Plan::Boundary(_) => "boundary",
            Plan::CvLambda(_) => "cv-lambda",
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Plan::Experiment1(c) => Some(c.seed),
            Plan::Distill(c) => Some(c.seed),
            Plan::CvLambda(c) => Some(c.seed),
            Plan::Evaluate(_) | Plan::Boundary(_) => None,
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        match self {
            Plan::Experiment1(c) => c.validate(),
            Plan::Distill(c) => c.validate(),
            Plan::Evaluate(c) => c.validate(),
            Plan::Boundary(c) => c.validate(),
            Plan::CvLambda(c) => c.validate(),
        }
    }

    fn manifest(&self, outputs: Vec<String>) -> anyhow::Result<Manifest> {
        let seed = self.seed();
        match self {
            Plan::Experiment1(c) => Manifest::new(self.name(), seed, c, outputs),
            Plan::Distill(c) => Manifest::new(self.name(), seed, c, outputs),
            Plan::Evaluate(c) => Manifest::new(self.name(), seed, c, outputs),
            Plan::Boundary(c) => Manifest::new(self.name(), seed, c, outputs),
            Plan::CvLambda(c) => Manifest::new(self.name(), seed, c, outputs),
        }
    }

    /// Builds the plan from a config file (or defaults) and flag overrides.
    pub fn resolve(command: &Command, global: &GlobalArgs) -> anyhow::Result<Plan> {
        let file = global.config.as_deref();
        if global.reps.is_some() && !matches!(command, Command::Experiment1 { .. }) {
            bail!("--reps only applies to experiment1");
        }
        let plan = match command {
            Command::Experiment1 { lambda_grid } => {
                let mut c: Experiment1Config = load(file)?;
                override_opt(&mut c.seed, global.seed);
                override_opt(&mut c.sweep.reps, global.reps);
                override_opt(&mut c.sweep.lambda_grid, lambda_grid.clone());
                Plan::Experiment1(c)
            }
            Command::Distill { lambda_grid } => {
                let mut c: DistillRunConfig = load(file)?;
                override_opt(&mut c.seed, global.seed);
                override_opt(&mut c.distill.lambda_grid, lambda_grid.clone());
                Plan::Distill(c)
            }
            Command::Evaluate {
                scores,
                bins,
                groups,
            } => {
                no_seed(global, "evaluate")?;
                let mut c: EvaluateConfig = load(file)?;
                if let Some(p) = scores {
                    c.scores = Some(p.clone());
                }
                override_opt(&mut c.bins, *bins);
                override_opt(&mut c.groups, *groups);
                c.scores = c.scores.as_deref().map(absolute).transpose()?;
                Plan::Evaluate(c)
            }
            Command::Boundary {
                model,
                data,
                x_range,
                y_range,
                resolution,
            } => {
                no_seed(global, "boundary")?;
                let mut c: BoundaryConfig = load(file)?;
                if let Some(p) = model {
                    c.model = Some(p.clone());
                }
                if let Some(p) = data {
                    c.data = Some(p.clone());
                }
                if let Some(r) = x_range {
                    c.grid.x_range = pair(r, "--x-range")?;
                }
                if let Some(r) = y_range {
                    c.grid.y_range = pair(r, "--y-range")?;
                }
                override_opt(&mut c.grid.resolution, *resolution);
                c.model = c.model.as_deref().map(absolute).transpose()?;
                c.data = c.data.as_deref().map(absolute).transpose()?;
                Plan::Boundary(c)
            }
            Command::CvLambda {
                data,
                lambda_grid,
                folds,
            } => {
                let mut c: CvLambdaConfig = load(file)?;
                override_opt(&mut c.seed, global.seed);
                if let Some(p) = data {
                    c.data = Some(p.clone());
                }
                override_opt(&mut c.lambda_grid, lambda_grid.clone());
                override_opt(&mut c.folds, *folds);
                c.data = c.data.as_deref().map(absolute).transpose()?;
                Plan::CvLambda(c)
            }
            Command::Rerun { .. } => bail!("rerun is resolved from its manifest"),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Rebuilds the exact plan recorded in a manifest.
    pub fn from_manifest(m: &Manifest) -> anyhow::Result<Plan> {
        let v = m.config.clone();
        let plan = match m.command.as_str() {
            "experiment1" => Plan::Experiment1(serde_json::from_value(v)?),
            "distill" => Plan::Distill(serde_json::from_value(v)?),
            "evaluate" => Plan::Evaluate(serde_json::from_value(v)?),
            "boundary" => Plan::Boundary(serde_json::from_value(v)?),
            "cv-lambda" => Plan::CvLambda(serde_json::from_value(v)?),
            other => bail!("unknown command {other:?} in manifest"),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Runs the plan, writing outputs and the manifest into `out`.
    /// Returns the text summary for stdout.
    pub fn execute(&self, out_dir: &Path, quiet: bool) -> Result<String, CliError> {
        let mut out = Output::create(out_dir, quiet)?;
        let summary = match self {
            Plan::Experiment1(c) => commands::experiment1(c, &mut out).map(|_| String::new())?,
            Plan::Distill(c) => commands::distill(c, &mut out)?,
            Plan::Evaluate(c) => commands::evaluate(c, &mut out)?,
            Plan::Boundary(c) => commands::boundary(c, &mut out).map(|_| String::new())?,
            Plan::CvLambda(c) => commands::cv_lambda(c, &mut out)?,
        };
        let manifest = self
            .manifest(out.files().to_vec())
            .map_err(CliError::Compute)?;
        manifest.write(out.dir()).map_err(CliError::Compute)?;
        Ok(format!(
            "{summary}wrote {} files and {} to {}\n",
            out.files().len(),
            manifest::FILE_NAME,
            out.dir().display()
        ))
    }
}

fn override_opt<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn no_seed(global: &GlobalArgs, cmd: &str) -> anyhow::Result<()> {
    if global.seed.is_some() {
        bail!("{cmd} is deterministic and takes no --seed");
    }
    Ok(())
}

fn pair(v: &[f64], flag: &str) -> anyhow::Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(anyhow!("{flag} needs exactly two values lo,hi")),
    }
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Entry point behind `main`: returns the text to print on success.
pub fn run(command: &Command, global: &GlobalArgs) -> Result<String, CliError> {
    let (plan, out) = match command {
        Command::Rerun { manifest } => {
            if global.seed.is_some() || global.config.is_some() || global.reps.is_some() {
                return Err(CliError::Usage(anyhow!(
                    "rerun takes only --out and --quiet; the manifest fixes everything else"
                )));
            }
            let m = Manifest::read(manifest).map_err(CliError::Usage)?;
            let plan = Plan::from_manifest(&m).map_err(CliError::Usage)?;
            let out = match &global.out {
                Some(o) => o.clone(),
                None => manifest.parent().unwrap_or(Path::new(".")).join("rerun"),
            };
            (plan, out)
        }
        _ => {
            let plan = Plan::resolve(command, global).map_err(CliError::Usage)?;
            (
                plan,
                global
                    .out
                    .clone()
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            )
        }
    };
    plan.execute(&out, global.quiet)
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "problabel", version)]
#[command(about = "Train and evaluate classifiers from probabilistic labels")]
#[command(after_help = "Examples:
  problabel experiment1 --reps 5 --out runs/exp1
  problabel distill --lambda-grid 0,1,10 --out runs/distill
  problabel evaluate --scores preds.csv --out runs/eval
  problabel boundary --model runs/exp1/model_hard.json --out runs/boundary
  problabel rerun runs/exp1/manifest.json --out runs/exp1-again")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Root seed; overrides the config file
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// JSON config file for the command
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Monte-Carlo repetitions (experiment1 only)
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Print nothing but errors
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Accuracy-vs-n and ECE-vs-imbalance sweeps on the two-Gaussian mixture,
    /// plus example decision boundaries
    Experiment1 {
        /// Comma-separated lambda candidates for the regularized arm
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
    },

    /// Synthetic-image distillation: hard / soft / prob / reg image networks
    Distill {
        /// Comma-separated lambda candidates for cross-validation
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
    },

    /// Metrics for a `score,label` CSV
    Evaluate {
        /// Score file
        #[arg(long)]
        scores: Option<PathBuf>,

        /// Calibration bins
        #[arg(long)]
        bins: Option<usize>,

        /// Hosmer-Lemeshow groups
        #[arg(long)]
        groups: Option<usize>,
    },

    /// Decision-boundary grid of a 2-D model
    Boundary {
        /// Model JSON written by another command
        #[arg(long)]
        model: Option<PathBuf>,

        /// Dataset CSV overlaid as points
        #[arg(long)]
        data: Option<PathBuf>,

        /// `lo,hi` of the first feature
        #[arg(long, value_delimiter = ',', num_args = 2)]
        x_range: Option<Vec<f64>>,

        /// `lo,hi` of the second feature
        #[arg(long, value_delimiter = ',', num_args = 2)]
        y_range: Option<Vec<f64>>,

        /// Points per axis
        #[arg(long)]
        resolution: Option<usize>,
    },

    /// Cross-validate lambda for two-stage training on a dataset with soft labels
    CvLambda {
        /// Dataset CSV with `p0..` soft-label columns
        #[arg(long)]
        data: Option<PathBuf>,

        /// Comma-separated lambda candidates
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,

        /// Number of folds
        #[arg(long)]
        folds: Option<usize>,
    },

    /// Re-execute a run from its manifest
    Rerun {
        /// manifest.json of an earlier run
        manifest: PathBuf,
    },
}

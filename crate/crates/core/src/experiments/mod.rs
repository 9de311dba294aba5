//! Gaussian-mixture sweeps and the synthetic imaging distillation track.

mod imaging;
mod mixture;
mod sweep;

pub use imaging::{
    extract_roi_means, generate_synthetic_images, run_distillation_experiment, DistillArm,
    DistillConfig, DistillResult, DistillStrategy, FeatureTeacher, OffsetDist, Roi,
    SyntheticImageConfig,
};
pub use mixture::{sample_mixture, true_posterior, MixtureComponent, MixtureSpec};
pub use sweep::{
    default_n_values, fit_example_models, run_accuracy_vs_n, run_imbalance_vs_ece, ExampleModels,
    FeatureScaling, IncorrectLabels, Strategy, StrategySeries, SweepConfig, SweepResult,
};

//! Experiment driver: configuration, the checkpoint and test protocol, metrics
//! files and learning-curve plots.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod train;

pub use config::{EnvironmentKind, ExperimentConfig, Optimism, Task, CHECKPOINTS};
pub use metrics::{
    checkpoint_mean, curve_points, load_metrics, mean_and_sample_sd, metrics_to_string,
    read_metrics, save_metrics, write_metrics, CurvePoint, Metric, MetricsRecord, METRICS_HEADER,
};
pub use plot::{emit_curves, load_series, read_plotted_points, render_svg, Series};
pub use train::{
    architecture_for, calibrate_optimism, derive_seed, make_env, run_test, run_training,
    run_training_with, test_checkpoint, test_seeds, RunOutcome, TrainingReport, OUTPUT_DIR_ENV,
};

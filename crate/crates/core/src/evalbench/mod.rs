//! Evaluation: metrics, speedups, synthetic lakes, noise experiments and plot data.

pub mod experiment;
pub mod metrics;
pub mod pca;
pub mod plot;
pub mod synth;

pub use experiment::{
    noise_shift, report_csv, run_experiment, spearman, ExperimentConfig, ExperimentOutcome, QueryFailure,
    QueryOutcome, ReportRow, REPORT_HEADER,
};
pub use metrics::{amortized_speedup, mae, rmse, speedup};
pub use pca::{pca_project, Projection};
pub use plot::{loss_bars_csv, noise_shift_csv, representation_csv, PlotKind};
pub use synth::{add_gaussian_noise, gen_synth_dataset, sr_select, synth_columns, Generator, NoiseScope};

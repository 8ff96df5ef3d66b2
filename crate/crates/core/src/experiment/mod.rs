//! Experiment plumbing: config files, sweeps, per-run metrics, summaries and plot data.

mod config;
mod metrics;
mod summary;
mod sweep;

pub use config::{parse_config, parse_config_str, ExperimentConfig, SweepConfig};
pub use metrics::{
    metrics_to_string, parse_metrics_str, read_metrics, timing_path, timing_to_string, write_atomic, MetricsFile,
    RunSpec, SCHEMA_HEADER,
};
pub use summary::{
    aggregate, aggregate_dir, export_plot_data, moving_average, plot_tables, summary_table, RewardCurve, SeedSummary,
    Summary, SummaryPoint, TailWindow, PLOT_FILES, REWARD_SMOOTHING_EPISODES,
};
pub use sweep::{run_spec, run_sweep, run_to_file, sweep_specs, RunStatus, SweepReport};

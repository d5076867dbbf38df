//! Experiment orchestration: presets, trials, ensembles, curves and CSVs.

pub mod config;
pub mod experiment;
pub mod output;
pub mod regression;
pub mod trial;

pub use config::{build_scheme, default_fault, preset_names, ExperimentConfig};
pub use experiment::{
    aggregate, binned_tpr, bins_monotone, run_ablation, run_experiment, run_indexed_trial, summarize, tpr_where,
    Aggregate, BinStat, CurvePoint, ExperimentSummary,
};
pub use output::{emit_ablation, emit_outputs};
pub use regression::{kernel_regression, log_grid, silverman_bandwidth};
pub use trial::{fault_step_range, run_trial, StepTrace, TrialOptions, TrialRecord, TrialStatus};

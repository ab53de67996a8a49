//! Experiment plans, the parallel sweep engine and result tables.

mod plan;
mod runner;
mod table;

pub use plan::{
    preset_labels, ConfigEntry, ExperimentPlan, MultiTaskSettings, NarmaSettings,
    ObservationSettings, PayloadSettings, PwmPattern, SubstrateOverrides, TaskKind,
};
pub use runner::{
    derive_seed, item_runs, observe, run_multitask_point, run_narma_point, run_payload_point,
    run_plan, train_classifier,
};
pub use table::{
    export_csv, optimal_config_matrix, summarize, write_optimal_csv, write_summary_csv,
    CellSummary, OptimalCell, Report, ResultRow, ResultTable, COLUMNS, STATUS_OK,
};

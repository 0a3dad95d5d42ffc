//! Experiment driver, aggregation and report emission.

mod config;
mod emit;
mod experiments;
mod suite;
mod summary;

pub use config::{
    default_out_dir, AdapterConfig, experiment_metrics, metric_map, ExperimentConfig, RunRecord, METRIC_KEYS, OUT_DIR_ENV,
    SCHEMA_VERSION,
};
pub use emit::{
    deterministic_files, emit, fusion_csv, load_records, scores_csv, sha256_hex, EmitInput, Format, Manifest,
    ManifestEntry, RecordLine,
};
pub use experiments::{run_experiment, ExperimentRun};
pub use suite::{ScenarioSpec, ScenarioSuite};
pub use summary::{
    aggregate, aggregate_all, experiment_title, format_change, metric_decimals, relative_change, render_markdown,
    render_report, render_summary_csv, round_to, SummaryTable, SUMMARY_CSV_HEADER,
};

//! Experiment configuration, presets, execution and on-disk bundles.

mod bundle;
mod config;
mod presets;
mod run;

pub use bundle::{
    compare_run_dir, dataset_meta, history_columns, history_rows, matrix_csv, predicted_csv, predicted_rows,
    read_history, read_manifest, read_matrix_csv, read_predicted, run, write_bundle, write_dataset, Artifact, Manifest,
    MANIFEST_FILE, PREDICTED_COLUMNS,
};
pub use config::{DatasetSpec, ExperimentConfig, Overrides, RankSpec, RunSpec, SplitSpec, TrainSpec};
pub use presets::{list_presets, preset, PRESETS};
pub use run::{execute, record_epochs, ExperimentOutcome, RankRow, RepeatSummary, RunOutcome, RunSummary};

//! Experiment harness: datasets, synthetic scenarios, the active learning
//! loop, penalty matrices and plot data.

pub mod dataset;
pub mod experiment;
pub mod penalty;
pub mod plot;
pub mod scenario;

pub use dataset::{Dataset, Dist, Manifest, Split};
pub use experiment::{
    read_records, run_al_experiment, run_on_dataset, run_single, specs_for, write_records, ALState,
    DataSource, ExperimentConfig, ExperimentRecord, RoundMetrics,
};
pub use penalty::{penalty_matrix, traces_from_records, MethodTraces, PenaltyMatrix};
pub use plot::{accuracy_table, cumulative_id_table, emit_plot_data, SeriesTable};
pub use scenario::{generate, ScenarioKind, ScenarioSpec, SplitSizes, PRESET_BUDGET};

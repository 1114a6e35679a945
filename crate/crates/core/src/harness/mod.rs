//! Configuration, the federated training loop, mode comparison and run
//! reports.

mod compare;
mod config;
mod report;
mod run;
mod seed;

pub use compare::{compare_modes, Comparison, ModeSummary, METRIC_ROWS};
pub use config::{DatasetKind, RunConfig};
pub use report::{comparison_json, metrics_text, report_json, write_report, METRICS_FILE, MODEL_FILE, REPORT_FILE, RULES_FILE, TIMING_FILE};
pub use run::{load_dataset, Dataset, prepare_data, run, run_prepared, with_mode, PreparedData, RoundRecord, RunReport, StopReason};
pub use seed::{derive_seed, SeedDomain};

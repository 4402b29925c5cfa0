//! Benchmark harness: dataset I/O, brute-force oracle, recall metrics,
//! static/streaming/ensemble protocols, and report emission.

pub mod dataset;
pub mod metrics;
pub mod protocol;
pub mod report;

pub use dataset::{load_bvecs, load_fvecs, load_ivecs, synthetic_dataset, write_ivecs, Dataset};
pub use metrics::{ground_truth, ground_truth_ids, recall_at_k};
pub use protocol::{
    run_ensemble, run_static, run_streaming, EnsembleConfig, EnsembleReport, StaticBenchConfig,
    StaticRow, StreamConfig, StreamCycleReport, StreamVariant,
};
pub use report::{ReportFormat, Table};

//! Metrics, reports and experiment runs.

mod experiment;
mod metrics;
mod report;
mod trec;

pub use experiment::{run_experiment, Experiment, ExperimentConfig, Retriever};
pub use metrics::{mrr_at_k, ndcg_at_k, recall_at_k, Metric, MetricKind, Ranking};
pub use report::{
    compare_reports, evaluate, ConfigFingerprint, MetricDelta, MetricReport, ReportComparison,
};
pub use trec::write_trec_run;

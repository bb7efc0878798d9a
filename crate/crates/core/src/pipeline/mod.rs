//! End-to-end orchestration used by the CLI: corpus preprocessing, the
//! statistical analysis report, ablation evaluation, and agent adaptation.

mod adapt;
mod analyze;
mod evaluate;
mod preprocess;
mod train;

pub use adapt::{adapt, AdaptConfig, SinkSpec};
pub use analyze::{analyze, read_features_csv, AnalysisReport, FeatureRow};
pub use evaluate::{evaluate, render_ablation_table, EvaluateConfig, EvaluationReport, SummaryRow};
pub use preprocess::{preprocess, EmbeddingsSource, PreprocessConfig, PreprocessSummary};
pub use train::{checkpoint_file_name, train_suite, RunSummary, TrainSuiteConfig, TrainSuiteSummary};

pub mod aspects;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod pipeline;
pub mod process;
pub mod quantize;
pub mod seed;
pub mod stats;
pub mod trace;

pub use aspects::{AspectKind, LineAspects};
pub use config::PipelineConfig;
pub use corpus::Corpus;
pub use dataset::{Candidate, DatasetInstance, Strategy, Task};
pub use eval::{EvalRecord, EvalReport, MetricsReport, RunOutcome};
pub use quantize::QuantizationScheme;
pub use stats::ComparisonReport;
pub use trace::{ExecutionTrace, SourceProgram, Split, TestCase, TraceStatus};

//! Benchmarks: a closed-loop HTTP load generator and end-to-end infusion
//! accuracy runs, with CSV/JSON report output.

pub mod accuracy;
pub mod load;
pub mod report;

pub use accuracy::{run_accuracy, AccuracyOptions, AccuracyReport, AccuracyRow};
pub use load::{run_load, run_load_blocking, Account, LoadConfig, LoadReport, SecondSample};
pub use report::{emit_report, Format, Report};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("server unreachable at {url}: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("run {seed} failed: {reason}")]
    Run { seed: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

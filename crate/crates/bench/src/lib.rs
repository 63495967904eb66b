//! Long-horizon benchmark suites, the rollout harness and its metrics.
//!
//! A suite ([`suite::BenchmarkSuite`]) fixes five-subtask chains, reset
//! seeds and instruction media. [`harness::run_suite`] rolls any
//! [`oevla_sim::PolicyFactory`] through it and [`metrics`] scores the logs.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod parallel;
pub mod suite;

pub use error::{BenchError, Result};
pub use harness::{
    compute_metrics, read_logs, rollout_sequence, run_suite, verify_log, write_logs, CodecLoopFactory, EvalReport,
    Replan, RolloutConfig, RolloutLog, SubtaskLog,
};
pub use metrics::{average_len, format_average_len, metrics_from_depths, MetricsReport, HORIZON};
pub use suite::{
    attach_instructions, gen_sequences, generate_suite, in_domain_crops, BenchmarkSuite, ChainPlan, Difficulty,
    EvalSequence, FormChoice, Resources, Subtask, SuiteConfig,
};

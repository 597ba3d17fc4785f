//! Realistic evaluation of generated test oracles.
//!
//! The crate ingests executed test cases (one record per generated test plus
//! its pass/fail outcome on the buggy and fixed program versions), classifies
//! them, and computes bug-finding metrics that reflect what a developer would
//! actually have to inspect:
//!
//! * [`corpus`]: record model, ingestion, deduplication, compile-error
//!   filtering and a synthetic corpus generator.
//! * [`trace`]: JVM stack-trace parsing and lexical `catch` detection.
//! * [`features`]: the eleven per-test ranking features.
//! * [`iforest`]: Isolation Forest scoring and per-bug ranking of failed
//!   tests, plus a random-ranking baseline.
//! * [`metrics`]: TP/FP/TN/FN, BugFound, FPR, Precision, Found@K and the
//!   NoException baseline.
//! * [`stats`]: Wilcoxon signed-rank test and Cliff's delta.
//! * [`pipeline`]: the end-to-end evaluation used by the `oracle-rank` CLI.

pub mod corpus;
pub mod features;
pub mod iforest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod trace;

mod text;

pub use corpus::{Corpus, Entry, ExecutionOutcome, OracleKind, TestRecord};
pub use features::FeatureVector;
pub use iforest::{IsolationForest, RankedList};
pub use metrics::{ConfusionCounts, OutcomeClass};
pub use trace::ParsedTrace;

//! Mining actionable and non-actionable static-analysis warnings from Git history.
//!
//! The pipeline walks the first-parent chain of a repository's default branch,
//! analyzes every commit that takes part in a Java-changing parent/child pair,
//! and labels the parent's warnings by comparing both reports against the diff:
//!
//! ```text
//! clone ─> first-parent commits ─> pairs ─> java diff ─┐
//!                                   │                  ├─> classify ─> per-pair JSONL
//!                                   └─> reports (R_p, R_c) ─┘
//! per-pair JSONL ─> keep-last NA ─> dataset + source archive ─> MinHash/LSH dedup
//! ```
//!
//! Modules map one-to-one onto the stages: [`repo`], [`analyzer`],
//! [`classifier`], [`dataset`], [`dedup`], [`stats`], and the orchestration in
//! [`pipeline`]. [`fixture`] builds the small synthetic repositories used by the
//! test suites and the `nascar fixture` command.

pub mod analyzer;
pub mod classifier;
pub mod dataset;
pub mod dedup;
pub mod fixture;
pub mod pipeline;
pub mod repo;
pub mod stats;

pub use analyzer::{Report, RuleUniverse, Span, Tool, Warning};
pub use classifier::{classify_pair, Classification, ClassifiedWarning, Label, WarningKey};
pub use dataset::{LabeledRecord, Positions};
pub use repo::{CommitMeta, CommitPair, FileDiff, Hunk, Repository, Sha};

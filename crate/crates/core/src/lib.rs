//! Intersectional bias detection over tabular data.
//!
//! * [`msd`] finds, exactly, the conjunctive subgroup whose probability mass
//!   differs most between two empirical distributions.
//! * [`linf`] tests one subgroup's outcome histogram against the population
//!   under a tolerance, with PAC margins when subsampling.
//! * [`api`] wires ingestion, encoding and both methods into task-level calls
//!   for in-memory tables, CSV files and two-sample comparisons.

pub mod api;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod linf;
pub mod msd;
pub mod subgroup;
pub mod synth;
pub mod tabular;

pub use api::{
    evaluate_biased_subgroup, evaluate_biased_subgroup_csv, evaluate_biased_subgroup_two_samples,
    most_biased_subgroup, most_biased_subgroup_csv, most_biased_subgroup_two_samples, DetectionReport, Evaluation,
    EvaluationReport, Method, Mode, Options,
};
pub use error::{AuditError, Result};
pub use linf::{LinfVerdict, PacConfig, Verdict};
pub use msd::{msd_brute_force, msd_evaluate, msd_search, signed_gap, MsdResult};
pub use subgroup::{format_rule, parse_rule, Literal, Rule};
pub use tabular::{BinSpec, BinningConfig, EncodedTable, FeatureSpec, RawTable, Schema};

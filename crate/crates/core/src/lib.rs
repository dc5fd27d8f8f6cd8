//! Multiplicity adjustment for families and trees of p-values.
//!
//! The crate provides:
//!
//! - single-family adjustments ([`adjust`]): Bonferroni, step-up FDR (BH),
//!   and its dependence-robust variant (BY), as adjusted p-values;
//! - the hierarchical procedure ([`mod@treebh`]): top-down family testing with
//!   level attenuation by cumulative selection fractions, Simes-combined
//!   p-values for internal nodes, and branch turn-off semantics;
//! - the numerical core ([`stats`]): normal CDF/quantile, 2x2 chi-square,
//!   Welch's t-test, FCR-adjusted confidence levels and intervals, and the
//!   two-study replication criterion;
//! - a seeded Monte Carlo harness ([`sim`]) estimating empirical FDR,
//!   power, and replication rates for each method on planted-signal trees;
//! - ingestion and reporting for study-replication result tables
//!   ([`rpp`]);
//! - document formats ([`io`]): JSON and CSV parsing/serialization of
//!   hypothesis trees and adjustment results.

mod arena;

pub mod adjust;
pub mod error;
pub mod io;
pub mod model;
pub mod rng;
pub mod rpp;
pub mod sim;
pub mod stats;
pub mod treebh;

mod special;

pub use adjust::{
    bh_adjust, bonferroni_adjust, by_adjust, expected_false_discoveries, reject_at_level,
    AdjustedFamily, FlatMethod,
};
pub use error::{Error, Result};
pub use io::{parse_tree, serialize_results, DocumentFormat};
pub use model::{
    ensure_valid, validate_tree, Direction, Hypothesis, HypothesisTree, Node, Truth, Violation,
    DEFAULT_Q,
};
pub use rpp::{
    contingency, headline_rates, ingest_records, multiplicity_summary, render_report, FieldArea,
    HeadlineRates, MultiplicitySummary, Rate, ReportFormat, RppRecord,
};
pub use sim::{
    generate_instance, run_fdr_experiment, run_replication_experiment, Clustering, Estimate,
    MethodReport, SimulationConfig, SimulationReport,
};
pub use stats::{
    chi_square_2x2, fcr_intervals, fcr_level, normal_cdf, normal_quantile, replication_outcome,
    welch_t, ChiSquareResult, ContingencyTable2x2, FcrInterval, GroupSummary,
    SelectedIntervalSpec, WelchResult,
};
pub use treebh::{node_p, treebh, turned_off_branches, AdjustmentResult};

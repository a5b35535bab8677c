//! Diagnostic-test analysis for discrete-valued time series.
//!
//! The pipeline: ingest real-valued series as a labeled matrix, discretize
//! each row by sign-of-change or quantile binning, then treat rows as objects
//! and columns as features. A *test* is a column subset on which all rows
//! stay pairwise distinct; a *dead-end test* is an inclusion-minimal one.
//! The crate enumerates dead-end tests through the discernibility family,
//! clusters rows by projection, computes the closed-form probabilities of
//! row matches and matching tests (with exact-rational and log-space paths),
//! and validates them with a reproducible Monte Carlo harness.

pub mod cli;
pub mod discretize;
pub mod error;
pub mod matrix;
pub mod montecarlo;
pub mod probability;
pub mod report;
pub mod testing;

pub use error::{Error, Result};
pub use matrix::{ColumnSet, DiscreteMatrix, RawSeriesMatrix};

//! Numerical core for instrumental-variable discovery on observational panel data.
//!
//! The crate provides:
//!
//! - [`data`] — long-format panel ingestion, complete-case alignment,
//!   standardization, and Pearson correlations with explicit missing-data
//!   semantics;
//! - [`regress`] — OLS with HC1 robust covariance, the first-stage
//!   F-statistic, two-stage least squares, the Wald/LATE ratio, and the
//!   Granger causality F-test (with panel pooling);
//! - [`preselect`] — enumeration of variable pairs passing correlation and
//!   sample-size thresholds;
//! - [`consistency`] — agreement metrics between instrument-wise treatment
//!   effects, a random-proxy baseline, and empirical p-values against a
//!   null distribution of random proxy pairs;
//! - [`synth`] — seeded linear structural causal models with known ground
//!   truth, used as test oracles throughout.
//!
//! Everything here is deterministic given its inputs and seeds; nothing in
//! this crate talks to the network.

pub mod consistency;
pub mod data;
pub mod error;
pub mod preselect;
pub mod query;
pub mod regress;
pub mod synth;

pub use data::{AlignedSeries, AlignedTable, CsvSchema, PanelDataset, VariableMeta};
pub use error::{Error, Result};
pub use preselect::{preselect, PairCandidate, PreselectOutcome};
pub use query::CausalQuery;
pub use regress::{GrangerResult, GrangerSegment, IvEstimate, LinearFit};

//! Matching engine for two-person ride pooling under fair cost-sharing.
//!
//! The pipeline, bottom to top:
//!
//! * [`road`] — directed road networks with cost/time weights, shortest-path
//!   queries, and a geometric fallback for GPS trip data.
//! * [`plan`] — feasible shared rides for commuter pairs (hitchhiking and
//!   combined waypoint orders), minimum-cost ride selection, and the matching
//!   graph of pair costs and standalone costs.
//! * [`mechanism`] — the four budget-balanced cost-sharing rules (equal,
//!   egalitarian, proportional, segment-based), payment-ranked preference
//!   orders, and negative-utility screening.
//! * [`matching`] — the propose/suspend stable-matching algorithm extended
//!   with standalone rides, blocking-pair verification, and cyclic-preference
//!   detection.
//! * [`optimum`] — the exact minimum-cost assignment via maximum-weight
//!   matching on the savings graph, plus a brute-force oracle.
//! * [`metrics`] — social optimality ratio, social utility, and per-commuter
//!   distribution reports.
//! * [`harness`] — trip ingestion, synthetic workload generation, and the
//!   experiment driver that runs every mechanism over one instance.

pub mod error;
pub mod harness;
pub mod matching;
pub mod mechanism;
pub mod metrics;
pub mod optimum;
pub mod plan;
pub mod road;
pub mod trip;

mod blossom;

pub use error::{Error, Result};

/// Absolute tolerance for all currency and ratio comparisons.
pub const EPS: f64 = 1e-9;

/// Largest accepted cost magnitude; larger inputs are rejected at ingestion
/// so the absolute tolerance stays meaningful.
pub const MAX_COST: f64 = 1e12;

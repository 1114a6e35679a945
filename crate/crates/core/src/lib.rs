//! Uncertainty-aware explainable federated learning.
//!
//! Clients train small concept-to-class predictors on uncertainty-adjusted
//! concept vectors and report positive-literal DNF rules scored with an
//! aleatoric uncertainty. The server ranks those rules by accuracy times
//! uncertainty, merges the best ones into one conflict-free rule per class
//! behind a validation gate, and weights model averaging by how often each
//! client's rules were selected.
//!
//! Module map:
//!
//! * [`rules`] - literals, conjunctions, DNF rules, conflict detection and
//!   uncertainty propagation, plus the textual rule format.
//! * [`model`] - concept data points, the linear softmax predictor, relevance
//!   extraction and sample-level rule extraction.
//! * [`datasets`] - planted-rule and overlay generators, partitioning, and the
//!   dataset file format.
//! * [`client`] / [`server`] - one federated round on each side.
//! * [`metrics`] - model accuracy, rule accuracy, rule fidelity, rule uncertainty.
//! * [`harness`] - run configuration, the training loop, mode comparison and
//!   run reports.

pub mod client;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rules;
pub mod server;

pub use error::{Result, XflError};

//! Kidney-exchange clearing under three ways of weighting patients.
//!
//! - `EQUAL`: every donation counts the same; ties between maximum-cardinality
//!   matchings are broken at random.
//! - `HOMOGENEOUS`: each donation is worth the recipient profile's
//!   Bradley-Terry score.
//! - `HETEROGENEOUS`: every arriving pair draws its own feature weights from a
//!   fitted random-coefficients logit and weights its outgoing donations by
//!   that draw's normalized view of the recipient.
//!
//! All three clear to a maximum-cardinality matching; the weights only choose
//! among those. See the crate's `examples/` directory for one runnable program
//! per capability.

pub mod cli;
pub mod clearing;
pub mod error;
pub mod graph;
mod lp;
pub mod preferences;
pub mod profile;
pub mod report;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};

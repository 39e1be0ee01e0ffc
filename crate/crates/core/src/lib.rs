//! Structured robust invariant sets and distributed safety filters for
//! networks of coupled linear systems with polytopic parameter uncertainty.
//!
//! The crate is organised along the two phases of the method:
//!
//! * offline: [`partition`] the constrained state space into Voronoi cells and
//!   [`synthesis`] one structured ellipsoidal robust invariant set plus a
//!   structured backup gain per cell, by way of the semidefinite programs
//!   assembled in [`lmi`];
//! * online: wrap an arbitrary learning input with either the
//!   [`implicit_filter`] (one SDP per step) or the [`explicit_filter`]
//!   (function evaluations over the precomputed family), optionally evaluated
//!   through [`consensus`] rounds.
//!
//! [`harness`] closes the loop in simulation and measures coverage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Links the system OpenBLAS used by the conic solver's dense factorizations.
extern crate openblas_src;

pub mod consensus;
pub mod error;
pub mod explicit_filter;
pub mod harness;
pub mod implicit_filter;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod partition;
pub mod synthesis;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use explicit_filter::{FilterDecision, MembershipMode};
pub use implicit_filter::{ImplicitDecision, ImplicitOptions};
pub use lmi::{SdpProblem, SolveResult, SolveStatus, Tolerances};
pub use model::{CommGraph, ModelSpec, NetworkModel, PolytopicSet, UncertainAffineDynamics};
pub use partition::{Partition, Region};
pub use synthesis::{CertifiedRegion, CertifiedSetFamily, ObjectiveMode, SynthesisConfig};

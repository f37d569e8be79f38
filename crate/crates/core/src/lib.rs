//! Selective-door adjustment for linear structural equation models.
//!
//! The crate decides whether a population partial regression coefficient
//! equals a controlled total effect in a linear SEM whose causal path
//! diagram is an acyclic directed mixed graph (ADMG), computes the exact
//! post-treatment bias when it does not, and checks the generic necessity of
//! the criterion by Monte Carlo.
//!
//! Module map:
//!
//! - [`graph`]: ADMG representation, simple paths, blocking and the
//!   back-door / selective-door / single-door criteria.
//! - [`sem`]: linear SEM parameterization, implied moments, controlled total
//!   effects, ancestral expansion and population regression.
//! - [`adjust`]: identification verdicts, corollary checks, bias
//!   decomposition and the tilde-variable identities.
//! - [`montecarlo`]: random parameter draws, the necessity verifier, data
//!   simulation, OLS and the nonlinear worked example.
//! - [`cli`]: model/report file formats and the `seldoor` subcommands.

pub mod adjust;
pub mod cli;
pub mod graph;
pub mod linalg;
pub mod montecarlo;
pub mod sem;

pub use adjust::{AdjustmentQuery, EffectReport};
pub use graph::{Admg, CriterionMode, Path, VertexId, VertexSet};
pub use sem::{MomentSet, RegressionResult, SemModel};

//! Stochastic mirror descent and mirror-prox under Markovian noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: norm pairs, Bregman divergences and prox mappings;
//! - [`chain`]: finite ergodic Markov chains and their mixing diagnostics;
//! - [`problems`]: quadratic minimization and bilinear VI instances whose
//!   oracles are perturbed by chain-state dependent, zero-mean shifts;
//! - [`estimators`]: single-sample, batch-mean and truncated-geometric
//!   (multilevel) estimators consuming one shared chain cursor;
//! - [`solvers`]: accelerated mirror descent and mirror-prox, each with and
//!   without batching, plus the step-size schedules;
//! - [`validation`]: gap metrics, rate fits and Monte-Carlo scaling checks.

// Negated comparisons deliberately treat NaN as invalid input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod problems;
pub mod solvers;
pub mod validation;

pub use error::{Error, Result};

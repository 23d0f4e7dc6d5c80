//! Counterfactual-probability explanations (necessity, sufficiency,
//! necessity-and-sufficiency) of black-box binary classifiers, with the
//! interventional probabilities identified by backdoor adjustment on a causal
//! graph that is given, constrained by prior structural knowledge, or learned
//! by causal discovery.

// `!(x > 0.0)` checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod demo;
pub mod discovery;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod scm;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type of the concrete pipeline.
pub type Real = f64;
/// Dense matrix over [`Real`].
pub type Matrix = linalg::Matrix<Real>;

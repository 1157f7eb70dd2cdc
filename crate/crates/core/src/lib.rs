//! Sparse Gaussian graphical models under an observed scalar confounder.
//!
//! The confounder `g` perturbs the interaction structure additively,
//! `Omega(g) = Omega_0 + R(g)`, with `R(g) = 0` for small `|g|`. The target is
//! the sparse non-confounded structure `Omega_0`. It is estimated by an
//! L1-penalized pseudo-profile likelihood: each node-wise regression is
//! profiled against a local-linear kernel smoother of the confounding term
//! ([`kernel`]), which leaves a plain quadratic in `Omega_0` ([`objective`])
//! minimized by coordinate descent ([`solver`]).
//!
//! [`baselines`], [`simulation`] and [`evaluation`] provide the comparison
//! estimators, a synthetic generator and ROC/AUC scoring; [`cli`] is the
//! file-based front end.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod cv;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod methods;
pub mod model;
pub mod objective;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ConfoundedDataset, FlatIndex, SymmetricParam};

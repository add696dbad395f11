//! Rank-based estimation for semiparametric accelerated failure time (AFT)
//! models with partly interval-censored (PIC) and doubly-censored (DC)
//! survival data.
//!
//! The AFT model relates log event times linearly to covariates,
//! `log T = β'X + ε`, with an unspecified error distribution. When event
//! times are only known up to censoring brackets, regression coefficients can
//! still be estimated by comparing the ranks of observed residual brackets
//! across subject pairs. This crate provides:
//!
//! - [`data`] — observation/dataset types, the PIC encoding, the DC→PIC
//!   reduction, and CSV ingestion;
//! - [`ranks`] — pairwise definite-ordering logic, per-subject Gehan scores,
//!   and the two-sample Gehan test;
//! - [`lad`] — a weighted least-absolute-deviation solver (interior point on
//!   the equivalent linear program plus a weighted-median polish);
//! - [`estimator`] — Gehan and iterative log-rank estimators, with cluster
//!   weighting for correlated (multivariate) data;
//! - [`variance`] — resampling-based sandwich covariance estimation and Wald
//!   confidence intervals;
//! - [`sim`] — seeded data generators and a replicated Monte Carlo study
//!   harness;
//! - [`cli`] — the `rankaft` command-line front end (`fit`, `test`,
//!   `convert`, `simulate`).
//!
//! All randomized procedures take explicit seeds and derive per-task RNG
//! streams, so results are reproducible regardless of thread count.

pub mod cli;
pub mod data;
pub mod estimator;
pub mod lad;
pub mod ranks;
pub mod rng;
pub mod sim;
pub mod variance;

mod error;

pub use error::{Error, Result, RowError};

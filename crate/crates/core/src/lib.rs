//! Censored time-to-event modelling without the standard library.
//!
//! The crate covers the full modelling path for churn-style survival data:
//!
//! - [`survival`]: censored datasets, risk tables, Kaplan-Meier curves,
//!   log-rank scores and median survival.
//! - [`cox`]: Cox proportional-hazards regression with a Breslow baseline.
//! - [`ctree`]: conditional inference trees that select split variables by
//!   permutation-test p-values on linear rank statistics.
//! - [`forest`]: bootstrap ensembles of those trees, aggregated by pooling
//!   node event and risk counts into one product-limit curve.
//! - [`evaluation`]: IPCW Brier scores, bootstrap cross-validation, Welch
//!   tests, ROC AUC and calibration pairs.
//! - [`churn`]: player event logs to feature rows and churn labels.
//! - [`synthetic`]: seeded generators for censored samples and event logs.
//!
//! Everything is allocation-based (`alloc`) and deterministic given seeds.
//! Parallelism is injected through [`exec::Executor`]; the default
//! [`exec::Sequential`] runs in order.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod churn;
pub mod cox;
pub mod ctree;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod forest;
pub mod survival;
pub mod synthetic;

mod linalg;
mod rng;
pub mod special;

pub use error::{Error, Result};
pub use survival::{Observation, RiskTable, SurvivalCurve, SurvivalDataset};

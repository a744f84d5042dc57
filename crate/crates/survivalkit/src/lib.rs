//! File formats, parallel execution and the command-line front end for
//! `survivalkit-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod format;
pub mod io;
pub mod parallel;

pub use error::{Error, Result};

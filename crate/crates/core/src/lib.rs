//! Space- and time-dependent continuous time random walks, their scaling limits, and the
//! fractional Kolmogorov equations that govern them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fracops;
pub mod harness;
pub mod kernels;
pub mod payoff;
pub mod quad;
pub mod report;
pub mod sde_process;
pub mod solvers;
pub mod special;

pub use error::{Error, Result};

//! Numerical lab for the fractional conductivity equation on a truncated
//! lattice: kernels, forms, exterior-value solves, DN maps, the Liouville
//! reduction, exterior determination and a partial-data counterexample.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterex;
pub mod dnmap;
pub mod error;
pub mod extdet;
pub mod forms;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod liouville;
pub mod sample;
pub mod solve;

pub use error::{Error, Result};

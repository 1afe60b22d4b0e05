//! q-Newton line search, symmetric indefinite factorization with
//! positive-definite modification, a BFGS baseline, a q-SQP solver and the
//! benchmark harness that exercises them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod linesearch;
pub mod problems;
pub mod psdfactor;
pub mod qcalc;
pub mod qmatrix;
pub mod sqp;
pub mod usolve;

pub use error::{Error, Result};

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fmt;
pub mod infotheory;
pub mod numkernel;
pub mod omp;
pub mod ric;

pub use error::{Error, Result};

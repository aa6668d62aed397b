#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod bits;
pub mod error;
pub mod harness;
pub mod info;
pub mod mixture;
pub mod predictors;
pub mod prob;
pub mod rng;
pub mod tasks;
pub mod train;

pub use bits::BitString;
pub use error::{Error, Result};
pub use rng::RngStream;

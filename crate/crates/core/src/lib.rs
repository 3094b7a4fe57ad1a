#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constants;
pub mod diagrams;
pub mod error;
pub mod greens;
pub mod media;
pub mod nonlinear;
pub mod quad;
pub mod squeezing;

pub use error::{Error, Result};

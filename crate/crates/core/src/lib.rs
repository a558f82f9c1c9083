//! Localization diagnostics for the almost Mathieu operator on finite windows.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cli;
pub mod dd;
pub mod dynamics;
pub mod eigensolve;
pub mod error;
pub mod expectation;
pub mod localization;
pub mod operator;

pub use error::{Error, Result};

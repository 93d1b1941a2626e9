//! Free and classical convolution of measures on the real line.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrays;
pub mod classical;
pub mod error;
pub mod freeconv;
pub mod generators;
pub mod harness;
pub mod measure;
mod sweep;
pub mod transform;

pub use error::{Error, Result};
pub use measure::{Atom, Density, GridSpec, Measure};

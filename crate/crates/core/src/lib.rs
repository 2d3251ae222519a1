// `!(a < b)` is how NaN bounds get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod graphnet;
pub mod io;
pub mod losses;
pub mod oracle;
pub mod registration;
pub mod remesh;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};

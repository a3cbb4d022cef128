// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod critical;
pub mod error;
pub mod hilbert;
pub mod lrv;
pub mod moment;
pub mod simlab;
pub mod testkit;
pub mod weights;

pub use error::{Error, Result};

//! Cross-modal weak labelling of scanning-radar data.

// `!(x >= 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod grid;
pub mod pose_chain;
pub mod projection;
pub mod sensors;
pub mod synthetic;
pub mod taxonomy;

pub use error::{Error, Result};

//! Bank-branch site selection.
//!
//! Criterion layers are classified and scored on a raster grid, combined with
//! weights derived from pairwise comparison matrices, and the best cells are
//! extracted as candidate sites. A maximal covering location model then picks
//! the `p` sites that cover the most population.

// `!(x >= y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod candidates;
pub mod criteria;
pub mod error;
pub mod geo;
pub mod mclp;
pub mod overlay;
pub mod weights;

pub use error::{Error, Result};

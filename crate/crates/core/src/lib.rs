// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod cli;
pub mod confidence;
pub mod dataset;
pub mod dense;
pub mod detector;
pub mod error;
pub mod feature_map;
pub mod features;
pub mod geometry;
pub mod image;
pub mod labels;
pub mod optimizer;
pub mod overlay;
pub mod scale;
pub mod selftest;
pub mod spectral;
pub mod tracker;

pub use error::{Error, Result};

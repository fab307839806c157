//! Social distance monitoring from a single fixed camera.
//!
//! Relative inverse depth from a monocular network is rescaled to metric
//! depth with sparse control points, people are localized from instance
//! masks, and pairwise distances are classified into risk levels.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod calibration;
pub mod distancing;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod maps;
pub mod people;
pub mod pipeline;
pub mod scaling;
pub mod synth;

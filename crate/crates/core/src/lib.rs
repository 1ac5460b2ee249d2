//! Animation clip curation, spatiotemporal conditioning data and
//! benchmark metrics for generated animation video.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod conditioning;
pub mod curation;
pub mod evalkit;
pub mod media;
pub mod providers;
pub mod report;
pub mod synth;

//! File formats, configuration, the staged pipeline and figure export on
//! top of `stancefield-core`.

// `!(x > y)` is written on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod svg;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{Pipeline, RunOptions, Stage};

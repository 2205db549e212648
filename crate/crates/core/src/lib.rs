//! Entropy-guided subsampling of large structured-grid simulation data.
//!
//! Data flow: [`ingest`] or [`synthetic`] produce a [`GridDataset`];
//! [`samplers::run_pipeline`] selects hypercubes and then points inside
//! them; [`metrics`] scores the result against the full data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod config;
pub mod entropy;
pub mod error;
pub mod exec;
pub mod grid;
pub mod ingest;
pub mod metrics;
pub mod output;
pub mod samplers;
pub mod scaling;
pub mod seed;
pub mod synthetic;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use grid::{GridDataset, GridDims};
pub use samplers::{run_pipeline, SampleSet};

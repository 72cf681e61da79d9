//! File formats, rendering, dataset handling and the pipeline behind the
//! `echofinder` command-line tool. The algorithms live in
//! [`echofinder_core`].

pub mod annotations;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod ech;
pub mod error;
pub mod fsutil;
pub mod model_io;
pub mod pipeline;
pub mod pool;
pub mod render;
pub mod report;
pub mod run;
pub mod samples;

pub use echofinder_core as core;
pub use error::{Error, Result};

//! Detection of herring schools in multifrequency echograms.
//!
//! The pipeline has two stages. [`roi`] proposes candidate regions from
//! intensity and shape alone; [`classify`] decides which candidates are
//! schools. [`mining`] builds classifier training sets from extractor
//! output, [`eval`] scores detections against ground truth, and [`synth`]
//! generates echograms with known schools.
//!
//! The crate is `no_std` with `alloc`. File formats, rendering and the
//! command-line tool live in the `echofinder` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod classify;
pub mod echogram;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod mask;
pub mod mining;
pub mod region;
pub mod roi;
pub mod synth;

pub use echogram::{normalize_sv, Echogram, EchogramMeta, Grid, SvWindow};
pub use error::{Error, Result};
pub use geometry::{iou, Annotation, BoundingBox, Label};
pub use mask::{BinaryMask, ScoreMatrix};
pub use region::{connected_components, region_orientation, CentralMoments, LabeledRegion, Orientation};

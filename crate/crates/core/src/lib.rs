//! Autonomous fish-pen net inspection toolkit.
//!
//! The crate covers the whole chain from labeled imagery to a mission-level
//! biofouling estimate:
//!
//! - [`imaging`]: frames, masks, color conversion and PNG I/O.
//! - [`cluster`]: K-means color clustering behind the labeling workflow.
//! - [`dataset`]: on-disk dataset layout shared by labeling and training.
//! - [`segmentation`]: per-pixel logistic regression, Dice, external masks.
//! - [`geometry`]: mesh-opening detection, pinhole distance, ideal-net render.
//! - [`fouling`]: per-frame coverage, footage filters, mission aggregation.
//! - [`rov`]: lawnmower planning, PID control and a simulated vehicle.
//! - [`synth`]: ground-truth net scenes and missions.
//! - [`config`]: `section.key=value` configuration with env overrides.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod components;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fouling;
pub mod geometry;
pub mod imaging;
pub mod rov;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};

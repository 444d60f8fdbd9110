//! Probabilistic filtering pipeline for category-level 6-DoF cuboid tracking.
//!
//! An object is represented by the 2D projections of the 8 vertices of its
//! bounding cuboid (plus its center). Per frame, heatmap peaks and
//! inter-frame offsets are fused by inverse-variance weighting, propagated
//! by a constant-velocity Kalman filter, and turned into a pose (up to
//! scale) by Levenberg-Marquardt PnP against the fused relative dimensions.
//! The posterior keypoints are rendered back into uncertainty-scaled
//! heatmaps that condition the next frame's detections.
//!
//! A synthetic world with a mock detector stands in for a trained network so
//! the whole loop, including the evaluation suite, can be run end to end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod filtering;
pub mod geometry;
pub mod heatmap;
pub mod losses;
pub mod metrics;
pub mod noise_sim;
pub mod pnp;
pub mod records;
pub mod synthworld;
pub mod tracker;

pub use error::{Error, Result};

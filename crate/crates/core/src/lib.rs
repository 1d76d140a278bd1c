//! Evaluation and calibration toolkit for generalized zero-shot learning
//! (GZSL): classification into the joint space of seen and unseen classes.
//!
//! The crate combines per-side discriminant scorers through direct stacking,
//! calibrated stacking, or novelty-gated two-stage rules; traces the
//! Seen-Unseen accuracy Curve with an exact breakpoint sweep and summarizes
//! it by its area (AUSUC); and selects hyperparameters by AUSUC-driven
//! class-wise cross-validation.

pub mod combine;
pub mod cv;
pub mod data;
pub mod error;
pub mod metrics;
pub mod novelty;
pub mod scorers;
pub mod synth;

pub use error::{Error, Result};

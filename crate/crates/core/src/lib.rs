//! Motion-focused quadruple construction for video contrastive learning,
//! at desk scale: synthetic videos, clip sampling, appearance and motion
//! disturbances, the quadruple loss family with analytic gradients, a small
//! MLP encoder, two-stage training and frozen-feature evaluation.

pub mod cliputil;
pub mod config;
pub mod disturb;
pub mod encoder;
pub mod eval;
pub mod error;
pub mod losses;
pub mod quadruple;
pub mod seed;
pub mod synthdata;
pub mod trainer;

pub use error::{Error, Result};

//! Entropy-guided point-prompt discovery.
//!
//! A coarse box is turned into verified positive and negative point prompts:
//! a superellipse spiral is laid over the box, sampled adaptively along its
//! arc length, scored by the entropy of a logistic membership model, split
//! into boundary-proximal and center-proximal queues and checked point by
//! point against a membership oracle until enough confident answers arrive.

pub mod bench;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod json;
pub mod pipeline;
pub mod sampler;
pub mod scene;
pub mod spiral;
pub mod verification;
pub mod viz;

pub use error::{Error, PipelineError, Result, Stage};

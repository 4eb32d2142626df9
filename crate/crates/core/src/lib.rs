//! Conversation-type classification for egocentric clips.
//!
//! Each frame becomes a relational graph over the camera wearer and the
//! visible persons (distance and gaze-attention relations). A relational
//! graph convolution summarizes the frame, a GRU carries the summaries and
//! the camera's ego-motion through time, and a pooled softmax head picks one
//! of five conversation types.
//!
//! The numeric core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`, which training and gradient checks use.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod scene;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Real;

pub type Matrix = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type FrameGraph = graph::FrameGraph<f64>;
pub type ClipTensor = scene::ClipTensor<f64>;
pub type ClipTensor32 = scene::ClipTensor<f32>;
pub type ModelParams = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type ForwardTrace = model::ForwardTrace<f64>;
pub type Gradients = model::Gradients<f64>;

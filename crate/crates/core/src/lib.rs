//! Token-level core of an action-conditioned video world model.
//!
//! Everything here is pure computation over `alloc` collections: finite scalar
//! quantization, the action and vocabulary codecs, autoregressive and
//! sliding-window re-encoding rollout, the stylized drift model, the GRPO
//! reward math with a tabular toy policy, and pixel/ROI video metrics. File
//! formats, configuration and the command line live in the `tokenworld` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod action;
pub mod drift;
pub mod error;
pub mod frame;
pub mod fsq;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod rollout;
pub mod seed;
pub mod sequence;
pub mod world;

pub use error::{Error, Result};
pub use frame::Frame;

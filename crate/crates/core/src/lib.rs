//! Distribution-level measurement core for auditing recommender systems.
//!
//! Everything here operates on dense probability vectors over item
//! categories (movie genres, product classes, ...). The building blocks:
//!
//! - [`dist`]: preference distributions with KL/JS divergence, uniform
//!   smoothing, mean distributions, and normalized entropy
//! - [`measures`]: per-user and system-level audit measures
//!   (miscalibration, bias/variance effects, stereotype, inflated
//!   diversity, bias disparity, atypicality, diversity)
//! - [`rank`]: binary-relevance nDCG@k
//! - [`stats`]: Welch's t-test backed by a self-contained Student-t CDF
//!
//! All functions are pure and deterministic; per-user work can fan out
//! across threads once the population means are computed.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable default
//! features and enable `libm` to build without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dist;
pub mod error;
mod math;
pub mod measures;
pub mod rank;
pub mod stats;

pub use dist::PreferenceDistribution;
pub use error::MeasureError;
pub use measures::{SystemAudit, UserAudit};

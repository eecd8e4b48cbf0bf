//! Audits recommender systems for miscalibration, system-induced bias, and
//! stereotype, and runs a stereotype-driven oversampling mitigation.
//!
//! The pipeline: parse and preprocess implicit-feedback data ([`data`]),
//! train one of four recommenders ([`models`]), audit the population with
//! the divergence measures from `recaudit-core` ([`audit`]), and optionally
//! rebalance the training data by oversampling stereotyped users and
//! re-audit ([`mitigate`]). [`config`] holds the run configuration shared
//! by the `recaudit` binary's subcommands.

pub mod audit;
pub mod config;
pub mod data;
pub mod error;
pub mod mitigate;
pub mod models;
pub mod toy;

pub use error::Error;

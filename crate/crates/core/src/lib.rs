//! Root-cause analysis of driving accidents in a deterministic micro-simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ads;
pub mod config;
pub mod cyber;
pub mod diff;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod geometry;
pub mod physical;
pub mod pipeline;
pub mod record;
pub mod report;
pub mod scenario;
pub mod search;
pub mod sim;

pub use error::{Error, Result};

//! Agent-based simulator of engagement on a microblogging feed, a factorial
//! experiment harness over information load and descriptive norms, and the
//! two-stage logit estimation used to analyze its logs.

pub mod digest;
pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod policy;
pub mod population;
pub mod recommender;
pub mod stats;

pub use error::{Error, Result};

//! Benchmark curation: drops multiple-choice examples that are too easy,
//! answerable without the question, or near-duplicates of one another, and
//! measures how model rankings change on what remains.

pub mod contamination;
pub mod easy;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prefilter;
pub mod report;
pub mod rng;
pub mod similarity;
pub mod validate;

pub use error::{Error, Result};

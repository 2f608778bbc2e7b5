//! Concept-learning benchmark: procedural datasets, concept/task
//! definitions, neural learners and the experiment drivers built on them.

pub mod dataset;
pub mod error;
pub mod experiments;
pub mod gbt;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod tasks;

pub use error::{Error, Result};

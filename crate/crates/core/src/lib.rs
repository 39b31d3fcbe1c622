//! Interpretable mortality risk modelling for ICU cohorts.

pub mod cohort;
pub mod error;
pub mod eval;
pub mod explain;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod stats;

pub use error::{Error, Result};

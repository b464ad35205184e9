//! Classification pipeline that recommends a teaching method for children
//! screened for autism spectrum disorder.
//!
//! The flow is: load and merge screening CSVs (or generate a synthetic
//! stand-in), label every row with a teaching method derived from the ten
//! binary screening answers, label-encode and standardize the features,
//! train four classifiers (Gaussian naive Bayes, CART decision tree, random
//! forest, k-nearest neighbours) and rank them on a held-out split by
//! accuracy with an F1 tie-break.

pub mod classifiers;
pub mod config;
pub mod data_model;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod preprocessing;
pub mod rules;
pub mod synthetic;

pub use error::{Error, Result};

/// Class code assigned by the rule set and predicted by every model.
pub type Label = u32;

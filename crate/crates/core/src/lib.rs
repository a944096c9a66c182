//! Weak supervision from natural-language explanations.
//!
//! Explanations are parsed into candidate labeling functions, filtered,
//! executed over an unlabeled pool, aggregated into probabilistic labels,
//! and used to train a discriminative classifier.

pub mod aggregator;
pub mod corpus;
pub mod discriminative;
pub mod error;
pub mod filterbank;
pub mod grammar;
pub mod lf_exec;
pub mod parser;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};

//! Review-to-release-note matching.
//!
//! The pipeline ingests app release notes and user reviews, splits both into
//! sentences, filters uninformative review sentences with a semi-supervised
//! Naive Bayes classifier, encodes sentences with two independent embedding
//! backends, and keeps the (note, review) pairs that rank in the top N of
//! both backends. The [`analysis`] module scores human labels of those pairs.

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod filter;
pub mod jsonl;
pub mod matcher;
pub mod postag;
pub mod preprocess;

pub use error::{Error, Result};

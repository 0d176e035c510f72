//! Financial-text risk detection toolkit.
//!
//! Ingests report text and indicator records, preprocesses text, extracts
//! bag-of-words / TF-IDF / embedding features, mines topics with LDA, trains
//! and evaluates five classifier families, and screens financial ratios.

pub mod corpus;
pub mod eval;
pub mod exec;
pub mod features;
pub mod finance;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod synth;
pub mod textfmt;
pub mod topics;

pub use exec::Execution;

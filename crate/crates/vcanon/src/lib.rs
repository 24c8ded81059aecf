//! Speech anonymization by frequency-warping voice conversion, and a
//! linkage-attack harness measuring how well converted speech can still be
//! attributed to its speaker.
//!
//! Signal processing, converters, strategies and the verifier live in
//! [`vcanon_core`]; this crate adds files, corpora, the attack grid, reports
//! and the command-line pipeline.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod manifest;
pub mod records;
pub mod report;
pub mod wav;

pub use error::{Error, Result};
pub use vcanon_core as core;
